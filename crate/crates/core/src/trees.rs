//! Canonical decorated rooted trees.
//!
//! A node carries a noise index `l` (with `l = 0` the unit symbol) and a
//! polynomial decoration `X^k`; an edge carries `(sort, derivative)` where
//! the sort selects which resolvent `(∂_{x0} - L^i)⁻¹` the edge encodes.
//! Children are kept sorted under a fixed total order, so structural
//! equality coincides with decorated rooted-tree isomorphism.

use crate::multi::Multi;
use crate::{Error, Rat, Result};
use num::{BigInt, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct NodeDeco {
    pub noise: u8,
    pub poly: Multi,
}

/// Edge label `a = (sort, k)`; sorts are 1-based to match `𝔱_1, …, 𝔱_{k0}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct EdgeLabel {
    pub sort: u8,
    pub deriv: Multi,
}

impl EdgeLabel {
    pub fn new(sort: u8, deriv: Multi) -> Self {
        EdgeLabel { sort, deriv }
    }

    pub fn plain(sort: u8) -> Self {
        EdgeLabel { sort, deriv: Multi::ZERO }
    }

    pub fn shift(&self, k: Multi) -> Self {
        EdgeLabel { sort: self.sort, deriv: self.deriv.add(k) }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tree {
    node: NodeDeco,
    children: Vec<(EdgeLabel, Tree)>,
}

impl Tree {
    /// Builds a tree, sorting the children into canonical order. Child trees
    /// are assumed canonical (every constructor in this crate keeps them so).
    pub fn new(node: NodeDeco, mut children: Vec<(EdgeLabel, Tree)>) -> Tree {
        children.sort();
        Tree { node, children }
    }

    /// Re-canonicalizes an arbitrarily ordered tree bottom-up.
    pub fn canonicalize(node: NodeDeco, children: Vec<(EdgeLabel, Tree)>) -> Tree {
        let children = children
            .into_iter()
            .map(|(e, t)| (e, Tree::canonicalize(t.node, t.children)))
            .collect();
        Tree::new(node, children)
    }

    /// The unit tree `1 = ζ_0`.
    pub fn unit() -> Tree {
        Tree { node: NodeDeco { noise: 0, poly: Multi::ZERO }, children: vec![] }
    }

    /// Bare noise node `ζ_l`.
    pub fn noise(l: u8) -> Tree {
        Tree { node: NodeDeco { noise: l, poly: Multi::ZERO }, children: vec![] }
    }

    /// Polynomial tree `X^k`.
    pub fn poly(k: Multi) -> Tree {
        Tree { node: NodeDeco { noise: 0, poly: k }, children: vec![] }
    }

    /// Planted tree `I_a(τ)`.
    pub fn planted(a: EdgeLabel, t: Tree) -> Tree {
        Tree {
            node: NodeDeco { noise: 0, poly: Multi::ZERO },
            children: vec![(a, t)],
        }
    }

    pub fn node(&self) -> NodeDeco {
        self.node
    }

    pub fn children(&self) -> &[(EdgeLabel, Tree)] {
        &self.children
    }

    pub fn root_noise(&self) -> u8 {
        self.node.noise
    }

    pub fn root_poly(&self) -> Multi {
        self.node.poly
    }

    pub fn is_unit(&self) -> bool {
        self.node.noise == 0 && self.node.poly.is_zero() && self.children.is_empty()
    }

    /// True when the root carries no noise, i.e. the tree is of the product
    /// form `X^k ∏ I_{a_i}(τ_i)` accepted by the grafting product.
    pub fn is_product_form(&self) -> bool {
        self.node.noise == 0
    }

    /// Replaces the root polynomial decoration.
    pub fn with_root_poly(&self, k: Multi) -> Tree {
        Tree { node: NodeDeco { noise: self.node.noise, poly: k }, children: self.children.clone() }
    }

    /// Adds `k` to the polynomial decoration of the root.
    pub fn add_root_poly(&self, k: Multi) -> Tree {
        self.with_root_poly(self.node.poly.add(k))
    }

    pub fn node_count(&self) -> u32 {
        1 + self.children.iter().map(|(_, t)| t.node_count()).sum::<u32>()
    }

    pub fn edge_count(&self) -> u32 {
        self.children.iter().map(|(_, t)| 1 + t.edge_count()).sum()
    }

    /// Number of nodes carrying a noise different from `ζ_0`.
    pub fn noise_count(&self) -> u32 {
        let own = if self.node.noise != 0 { 1 } else { 0 };
        own + self.children.iter().map(|(_, t)| t.noise_count()).sum::<u32>()
    }

    pub fn max_noise_index(&self) -> u8 {
        self.children
            .iter()
            .map(|(_, t)| t.max_noise_index())
            .max()
            .unwrap_or(0)
            .max(self.node.noise)
    }

    /// Merges two trees at the root (the tree product). Fails when both
    /// roots carry a noise.
    pub fn product(&self, other: &Tree) -> Result<Tree> {
        let noise = match (self.node.noise, other.node.noise) {
            (0, n) | (n, 0) => n,
            _ => return Err(Error::NotProductForm(format!("{self} · {other}"))),
        };
        let mut children = self.children.clone();
        children.extend(other.children.iter().cloned());
        Ok(Tree::new(
            NodeDeco { noise, poly: self.node.poly.add(other.node.poly) },
            children,
        ))
    }

    /// Decomposes the root: `(X^k, ζ_l, branches)`.
    pub fn root_parts(&self) -> (Multi, u8, &[(EdgeLabel, Tree)]) {
        (self.node.poly, self.node.noise, &self.children)
    }

    /// Recursive degree
    /// `deg(X^k ζ_l ∏ I_{a_j}(τ_j)) = |k|_s + α_l + Σ_j (deg τ_j + β - |k_j|_s)`.
    pub fn degree(&self, d: &Degrees) -> Result<Rat> {
        let alpha = d.noise_degree(self.node.noise)?;
        let mut deg = Rat::from_integer(BigInt::from(self.node.poly.par_deg())) + alpha;
        for (edge, child) in &self.children {
            deg += child.degree(d)?;
            deg += &d.beta - Rat::from_integer(BigInt::from(edge.deriv.par_deg()));
        }
        Ok(deg)
    }

    /// Symmetry factor: over every node, the factorial of each repeated
    /// `(edge label, subtree)` branch multiplicity, times `k!` for the
    /// polynomial decoration when `include_poly` is set.
    pub fn symmetry_factor(&self, include_poly: bool) -> u128 {
        let mut s: u128 = if include_poly { self.node.poly.factorial() } else { 1 };
        let mut i = 0;
        while i < self.children.len() {
            let mut j = i + 1;
            while j < self.children.len() && self.children[j] == self.children[i] {
                j += 1;
            }
            let mult = (j - i) as u128;
            s *= (1..=mult).product::<u128>();
            s *= self.children[i].1.symmetry_factor(include_poly).pow((j - i) as u32);
            i = j;
        }
        s
    }

    /// All subtrees (each node's full subtree), root first.
    pub fn subtrees(&self) -> Vec<&Tree> {
        let mut out = vec![self];
        for (_, c) in &self.children {
            out.extend(c.subtrees());
        }
        out
    }
}

/// Degree assignment: noise regularities `α_l` (with `α_0 = 0`) and the
/// kernel gain `β` (2 for second-order resolvents under parabolic scaling).
#[derive(Clone, Debug, PartialEq)]
pub struct Degrees {
    pub alphas: Vec<Rat>,
    pub beta: Rat,
}

impl Degrees {
    /// `alphas[l-1]` is the degree of `ζ_l`.
    pub fn new(alphas: Vec<Rat>) -> Degrees {
        Degrees { alphas, beta: Rat::from_integer(BigInt::from(2)) }
    }

    pub fn noise_degree(&self, l: u8) -> Result<Rat> {
        if l == 0 {
            return Ok(Rat::zero());
        }
        self.alphas
            .get(l as usize - 1)
            .cloned()
            .ok_or(Error::UnknownNoise(l))
    }

    pub fn noise_count(&self) -> u8 {
        self.alphas.len() as u8
    }
}

// ---------------------------------------------------------------------------
// Grammar:  tree := ("X^" "(" k0 "," k1 ")")? ("z" l)? branch*
//           branch := "I[" sort "," "(" k0 "," k1 ")" "](" tree ")"
// At least one of the X/z parts must be present; omitted z means ζ_0.
// ---------------------------------------------------------------------------

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.node.poly.is_zero() {
            write!(f, "X^({},{}) ", self.node.poly.k0, self.node.poly.k1)?;
        }
        write!(f, "z{}", self.node.noise)?;
        for (e, t) in &self.children {
            write!(f, " I[{},({},{})]({})", e.sort, e.deriv.k0, e.deriv.k1, t)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

pub fn parse(text: &str) -> Result<Tree> {
    let mut p = TreeParser { src: text.as_bytes(), pos: 0 };
    let t = p.tree()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input"));
    }
    Ok(t)
}

struct TreeParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> TreeParser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, b: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn int(&mut self) -> Result<u8> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| self.err("integer out of range"))
    }

    fn multi(&mut self) -> Result<Multi> {
        self.eat(b'(')?;
        let k0 = self.int()?;
        self.eat(b',')?;
        let k1 = self.int()?;
        self.eat(b')')?;
        Ok(Multi::new(k0, k1))
    }

    fn tree(&mut self) -> Result<Tree> {
        self.skip_ws();
        let mut poly = Multi::ZERO;
        let mut noise = 0u8;
        let mut saw_head = false;
        if self.src[self.pos..].starts_with(b"X^") {
            self.pos += 2;
            poly = self.multi()?;
            saw_head = true;
            self.skip_ws();
        }
        if self.src.get(self.pos) == Some(&b'z') {
            self.pos += 1;
            noise = self.int()?;
            saw_head = true;
        }
        if !saw_head {
            return Err(self.err("expected 'X^(k0,k1)' or 'z<l>'"));
        }
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            if self.src.get(self.pos) == Some(&b'I') && self.src.get(self.pos + 1) == Some(&b'[') {
                self.pos += 2;
                let sort = self.int()?;
                if sort == 0 {
                    return Err(self.err("sorts are 1-based"));
                }
                self.eat(b',')?;
                let deriv = self.multi()?;
                self.eat(b']')?;
                self.eat(b'(')?;
                let sub = self.tree()?;
                self.eat(b')')?;
                children.push((EdgeLabel::new(sort, deriv), sub));
            } else {
                break;
            }
        }
        Ok(Tree::new(NodeDeco { noise, poly }, children))
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    /// Brute-force decoration-preserving rooted isomorphism.
    pub fn isomorphic(a: &Tree, b: &Tree) -> bool {
        if a.node() != b.node() || a.children().len() != b.children().len() {
            return false;
        }
        let n = a.children().len();
        let mut used = vec![false; n];
        match_children(a.children(), b.children(), &mut used, 0)
    }

    fn match_children(
        a: &[(EdgeLabel, Tree)],
        b: &[(EdgeLabel, Tree)],
        used: &mut [bool],
        i: usize,
    ) -> bool {
        if i == a.len() {
            return true;
        }
        for j in 0..b.len() {
            if !used[j] && a[i].0 == b[j].0 && isomorphic(&a[i].1, &b[j].1) {
                used[j] = true;
                if match_children(a, b, used, i + 1) {
                    return true;
                }
                used[j] = false;
            }
        }
        false
    }

    /// Counts decoration-preserving automorphisms by permutation search.
    pub fn automorphism_count(t: &Tree) -> u128 {
        let n = t.children().len();
        let perms = permutations(n);
        let mut count: u128 = 0;
        for p in perms {
            let ok = (0..n).all(|i| {
                let (ea, ta) = &t.children()[i];
                let (eb, tb) = &t.children()[p[i]];
                ea == eb && ta == tb
            });
            if ok {
                count += 1;
            }
        }
        // Children are canonical, so automorphisms factor through each slot.
        t.children().iter().fold(count, |acc, (_, c)| acc * automorphism_count(c))
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    /// Random decorated tree with a given node budget.
    pub fn random_tree(rng: &mut impl Rng, nodes: u32, max_noise: u8) -> Tree {
        if nodes <= 1 {
            let noise = rng.gen_range(0..=max_noise);
            let poly = if noise == 0 && rng.gen_bool(0.3) {
                Multi::new(0, rng.gen_range(0..=2))
            } else {
                Multi::ZERO
            };
            return Tree::new(NodeDeco { noise, poly }, vec![]);
        }
        let noise = rng.gen_range(0..=max_noise);
        let n_children = rng.gen_range(1..=(nodes - 1).min(3));
        let mut budget = nodes - 1;
        let mut children = Vec::new();
        for i in 0..n_children {
            let rest = n_children - i - 1;
            let take = if rest == 0 { budget } else { rng.gen_range(1..=budget - rest) };
            budget -= take;
            let sort = 1;
            let deriv = if rng.gen_bool(0.25) { Multi::new(0, 1) } else { Multi::ZERO };
            children.push((EdgeLabel::new(sort, deriv), random_tree(rng, take, max_noise)));
        }
        Tree::new(NodeDeco { noise, poly: Multi::ZERO }, children)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use num::One;
    use rand::SeedableRng;

    fn she_degrees() -> Degrees {
        Degrees::new(vec![crate::parse_rat("-3/2").unwrap()])
    }

    #[test]
    fn canonicalize_sorts_children() {
        let a = EdgeLabel::plain(1);
        let b = EdgeLabel::new(1, Multi::new(0, 1));
        let z = Tree::noise(1);
        let t1 = Tree::canonicalize(
            NodeDeco { noise: 1, poly: Multi::ZERO },
            vec![(b, z.clone()), (a, z.clone())],
        );
        let t2 = Tree::canonicalize(
            NodeDeco { noise: 1, poly: Multi::ZERO },
            vec![(a, z.clone()), (b, z.clone())],
        );
        assert_eq!(t1, t2);
    }

    #[test]
    fn single_node_is_fixed_by_canonicalize() {
        let t = Tree::noise(1);
        assert_eq!(Tree::canonicalize(t.node(), vec![]), t);
    }

    #[test]
    fn canonical_equality_is_isomorphism_on_random_trees() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let t = random_tree(&mut rng, 8, 2);
            let u = random_tree(&mut rng, 8, 2);
            assert_eq!(t == u, isomorphic(&t, &u), "trees {t} vs {u}");
        }
    }

    #[test]
    fn degree_of_unit_and_polynomials() {
        let d = she_degrees();
        assert!(Tree::unit().degree(&d).unwrap().is_zero());
        // X^{(1,0)} has degree |k|_s = 2.
        let x10 = Tree::poly(Multi::new(1, 0));
        assert_eq!(x10.degree(&d).unwrap(), Rat::from_integer(2.into()));
    }

    #[test]
    fn degree_of_planted_product() {
        // I_{(t,0)}(ζ1)·ζ1 with α1 = -3/2 has degree -1.
        let d = she_degrees();
        let t = Tree::new(
            NodeDeco { noise: 1, poly: Multi::ZERO },
            vec![(EdgeLabel::plain(1), Tree::noise(1))],
        );
        assert_eq!(t.degree(&d).unwrap(), -Rat::one());
    }

    /// Independent recursive oracle for the degree.
    fn degree_oracle(t: &Tree, d: &Degrees) -> Rat {
        let mut v = d.noise_degree(t.root_noise()).unwrap()
            + Rat::from_integer(t.root_poly().par_deg().into());
        for (e, c) in t.children() {
            v += degree_oracle(c, d) + &d.beta - Rat::from_integer(e.deriv.par_deg().into());
        }
        v
    }

    #[test]
    fn degree_additive_under_product_and_shifts_under_planting() {
        let d = she_degrees();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t = random_tree(&mut rng, 5, 1);
            let u = random_tree(&mut rng, 4, 1);
            assert_eq!(t.degree(&d).unwrap(), degree_oracle(&t, &d));
            if let Ok(p) = Tree::poly(Multi::ZERO).product(&t) {
                assert_eq!(p.degree(&d).unwrap(), t.degree(&d).unwrap());
            }
            if t.root_noise() == 0 || u.root_noise() == 0 {
                let p = t.product(&u).unwrap();
                assert_eq!(
                    p.degree(&d).unwrap(),
                    t.degree(&d).unwrap() + u.degree(&d).unwrap()
                );
            }
            let e = EdgeLabel::new(1, Multi::new(0, 1));
            let planted = Tree::planted(e, t.clone());
            assert_eq!(
                planted.degree(&d).unwrap(),
                t.degree(&d).unwrap() + &d.beta - Rat::one()
            );
        }
    }

    #[test]
    fn noise_count_cases() {
        assert_eq!(Tree::unit().noise_count(), 0);
        assert_eq!(Tree::noise(1).noise_count(), 1);
        let t = parse("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)").unwrap();
        assert_eq!(t.noise_count(), 3);
        let planted = Tree::planted(EdgeLabel::plain(1), t.clone());
        assert_eq!(planted.noise_count(), t.noise_count());
    }

    #[test]
    fn symmetry_factor_cases() {
        assert_eq!(Tree::noise(1).symmetry_factor(true), 1);
        let two_equal = parse("z1 I[1,(0,0)](z1) I[1,(0,0)](z1)").unwrap();
        assert_eq!(two_equal.symmetry_factor(true), 2);
        let mixed = parse("z1 I[1,(0,0)](z1) I[1,(0,1)](z1)").unwrap();
        assert_eq!(mixed.symmetry_factor(true), 1);
        assert_eq!(Tree::poly(Multi::new(0, 2)).symmetry_factor(true), 2);
        assert_eq!(Tree::poly(Multi::new(0, 2)).symmetry_factor(false), 1);
    }

    #[test]
    fn symmetry_factor_matches_automorphism_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..120 {
            let t = random_tree(&mut rng, 6, 1);
            // Automorphism search ignores polynomial factorials.
            assert_eq!(t.symmetry_factor(false), automorphism_count(&t), "tree {t}");
        }
    }

    #[test]
    fn square_of_planted_tree_doubles_symmetry() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let inner = random_tree(&mut rng, 4, 1);
            let s = Tree::planted(EdgeLabel::plain(1), inner);
            let sq = s.product(&s).unwrap();
            assert_eq!(
                sq.symmetry_factor(true),
                2 * s.symmetry_factor(true) * s.symmetry_factor(true)
            );
        }
    }

    #[test]
    fn parse_print_round_trip() {
        for text in ["z1", "z1 I[1,(0,0)](z1)", "X^(0,2) z0", "X^(1,0) z0 I[2,(0,1)](z1 I[1,(0,0)](z0))"] {
            let t = parse(text).unwrap();
            assert_eq!(parse(&t.to_string()).unwrap(), t);
        }
        // Bare polynomial head without z-part.
        assert_eq!(parse("X^(1,0)").unwrap(), Tree::poly(Multi::new(1, 0)));
    }

    #[test]
    fn parse_reports_position() {
        match parse("z1 I[1,(0,0)](z1") {
            Err(Error::Parse { pos, .. }) => assert!(pos >= 15),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let t = parse("X^(0,1) z0 I[1,(0,1)](z1) I[1,(0,0)](z1 I[1,(0,0)](z1))").unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let u: Tree = serde_json::from_str(&s).unwrap();
        assert_eq!(t, u);
    }
}
