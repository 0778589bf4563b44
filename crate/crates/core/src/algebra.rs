//! Coproducts, the positive-sector antipode, root extraction, grafting and
//! character convolution on linear combinations of decorated trees.
//!
//! Elements of the positive structure are represented as trees whose root
//! carries no noise: the monomial `X^m ∏ I⁺_{a_i}(τ_i)` is the tree with
//! root decoration `X^m` and the planted branches as children. The tensor
//! containers keep both slots canonical.

use crate::grid::GridFunction;
use crate::multi::Multi;
use crate::trees::{Degrees, EdgeLabel, NodeDeco, Tree};
use crate::{rat_from_f64, Error, Point, Rat, Result};
use num::{One, Zero};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

// ---------------------------------------------------------------------------
// Linear combinations and tensor sums
// ---------------------------------------------------------------------------

/// Finite formal sum of canonical trees with exact rational coefficients.
/// Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct LinComb(BTreeMap<Tree, Rat>);

impl LinComb {
    pub fn zero() -> Self {
        LinComb(BTreeMap::new())
    }

    pub fn one(tree: Tree) -> Self {
        let mut m = BTreeMap::new();
        m.insert(tree, Rat::one());
        LinComb(m)
    }

    pub fn term(tree: Tree, coeff: Rat) -> Self {
        let mut l = LinComb::zero();
        l.add_term(tree, coeff);
        l
    }

    pub fn add_term(&mut self, tree: Tree, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.0.entry(tree).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            let dead: Vec<Tree> = self
                .0
                .iter()
                .filter(|(_, c)| c.is_zero())
                .map(|(t, _)| t.clone())
                .collect();
            for t in dead {
                self.0.remove(&t);
            }
        }
    }

    pub fn add(&mut self, other: &LinComb) {
        for (t, c) in &other.0 {
            self.add_term(t.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, c: &Rat, other: &LinComb) {
        for (t, k) in &other.0 {
            self.add_term(t.clone(), c * k);
        }
    }

    pub fn scaled(&self, c: &Rat) -> LinComb {
        let mut out = LinComb::zero();
        out.add_scaled(c, self);
        out
    }

    pub fn coeff(&self, tree: &Tree) -> Rat {
        self.0.get(tree).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Tree, &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Tree product extended bilinearly; fails when two noisy roots meet.
    pub fn product(&self, other: &LinComb) -> Result<LinComb> {
        let mut out = LinComb::zero();
        for (a, ca) in &self.0 {
            for (b, cb) in &other.0 {
                out.add_term(a.product(b)?, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn map_trees(&self, f: impl Fn(&Tree) -> Tree) -> LinComb {
        let mut out = LinComb::zero();
        for (t, c) in &self.0 {
            out.add_term(f(t), c.clone());
        }
        out
    }
}

impl fmt::Display for LinComb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, (t, c)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·[{t}]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for LinComb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<Tree> for LinComb {
    fn from(t: Tree) -> Self {
        LinComb::one(t)
    }
}

/// Sum of elementary tensors with both slots canonical trees.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct TensorSum(BTreeMap<(Tree, Tree), Rat>);

impl TensorSum {
    pub fn zero() -> Self {
        TensorSum(BTreeMap::new())
    }

    pub fn single(left: Tree, right: Tree) -> Self {
        let mut t = TensorSum::zero();
        t.add_term(left, right, Rat::one());
        t
    }

    pub fn add_term(&mut self, left: Tree, right: Tree, coeff: Rat) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.0.entry((left, right)).or_insert_with(Rat::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.0.retain(|_, c| !c.is_zero());
        }
    }

    pub fn add(&mut self, other: &TensorSum) {
        for ((l, r), c) in &other.0 {
            self.add_term(l.clone(), r.clone(), c.clone());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Tree, Tree), &Rat)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Componentwise tree product of tensors.
    pub fn product(&self, other: &TensorSum) -> Result<TensorSum> {
        let mut out = TensorSum::zero();
        for ((la, ra), ca) in &self.0 {
            for ((lb, rb), cb) in &other.0 {
                out.add_term(la.product(lb)?, ra.product(rb)?, ca * cb);
            }
        }
        Ok(out)
    }

    /// Applies `f` to the left slot of every term, extending bilinearly.
    pub fn map_left(&self, f: impl Fn(&Tree) -> LinComb) -> TensorSum {
        let mut out = TensorSum::zero();
        for ((l, r), c) in &self.0 {
            for (lt, lc) in f(l).terms() {
                out.add_term(lt.clone(), r.clone(), c * lc);
            }
        }
        out
    }
}

impl fmt::Display for TensorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (i, ((l, r), c)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({c})·[{l}] ⊗ [{r}]")?;
        }
        Ok(())
    }
}

impl fmt::Debug for TensorSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

// ---------------------------------------------------------------------------
// Coproducts
// ---------------------------------------------------------------------------

fn rat_int(n: u128) -> Rat {
    Rat::from_integer(n.into())
}

/// Largest admissible `|ℓ+m|_s` in the Taylor part of the coproduct at a
/// planted tree of degree `deg`: the strict bound `|ℓ+m|_s < deg`.
fn taylor_bound(deg: &Rat) -> Option<u32> {
    if deg <= &Rat::zero() {
        return None;
    }
    let b = deg.ceil().to_integer() - num::BigInt::one();
    if b.sign() == num::bigint::Sign::Minus {
        None
    } else {
        use num::ToPrimitive;
        Some(b.to_u32().unwrap_or(0))
    }
}

/// Binomial splitting of a polynomial decoration:
/// `X^k ↦ Σ C(k,j) X^j ⊗ X^{k-j}`.
fn poly_coproduct(k: Multi) -> TensorSum {
    let mut out = TensorSum::zero();
    for j in k.sub_indices() {
        out.add_term(
            Tree::poly(j),
            Tree::poly(k.checked_sub(j).unwrap()),
            rat_int(k.binomial(j)),
        );
    }
    out
}

/// Coproduct of a single planted branch `I_a(τ)` into `T ⊗ T⁺`:
/// `(I_a ⊗ Id) Δτ + Σ_{|ℓ+m|_s < deg I_aτ} X^ℓ/ℓ! ⊗ X^m/m! I⁺_{a+ℓ+m}(τ)`.
fn branch_coproduct(a: EdgeLabel, tau: &Tree, d: &Degrees) -> Result<TensorSum> {
    let inner = coproduct(tau, d)?;
    let mut out = TensorSum::zero();
    for ((l, r), c) in inner.terms() {
        out.add_term(Tree::planted(a, l.clone()), r.clone(), c.clone());
    }
    let deg = Tree::planted(a, tau.clone()).degree(d)?;
    if let Some(bound) = taylor_bound(&deg) {
        for l in Multi::with_par_deg_at_most(bound) {
            for m in Multi::with_par_deg_at_most(bound - l.par_deg()) {
                let coeff = Rat::one() / rat_int(l.factorial() * m.factorial());
                let planted = Tree::planted(a.shift(l.add(m)), tau.clone());
                let right = Tree::poly(m).product(&planted)?;
                out.add_term(Tree::poly(l), right, coeff);
            }
        }
    }
    Ok(out)
}

/// The coaction `Δ : T → T ⊗ T⁺`. Noises are primitive on the left,
/// polynomials split binomially, and the map is multiplicative over the
/// tree product at the root.
pub fn coproduct(tau: &Tree, d: &Degrees) -> Result<TensorSum> {
    let (poly, noise, branches) = tau.root_parts();
    let mut acc = poly_coproduct(poly);
    if noise != 0 {
        acc = acc.product(&TensorSum::single(Tree::noise(noise), Tree::unit()))?;
    }
    for (a, child) in branches {
        acc = acc.product(&branch_coproduct(*a, child, d)?)?;
    }
    Ok(acc)
}

fn ensure_positive_monomial(m: &Tree, d: &Degrees) -> Result<()> {
    if m.root_noise() != 0 {
        return Err(Error::OutsideSpace(m.to_string(), "noise at the root".into()));
    }
    for (a, t) in m.children() {
        let deg = Tree::planted(*a, t.clone()).degree(d)?;
        if deg <= Rat::zero() {
            return Err(Error::OutsideSpace(
                m.to_string(),
                format!("planted factor of non-positive degree {deg}"),
            ));
        }
    }
    Ok(())
}

/// The positive-sector coproduct `Δ⁺ : T⁺ → T⁺ ⊗ T⁺`, with the same
/// recursion shape as `Δ` and both slots in `T⁺`.
pub fn coproduct_plus(m: &Tree, d: &Degrees) -> Result<TensorSum> {
    ensure_positive_monomial(m, d)?;
    let mut acc = poly_coproduct(m.root_poly());
    for (a, child) in m.children() {
        let inner = coproduct(child, d)?;
        let mut part = TensorSum::zero();
        for ((l, r), c) in inner.terms() {
            part.add_term(Tree::planted(*a, l.clone()), r.clone(), c.clone());
        }
        let deg = Tree::planted(*a, child.clone()).degree(d)?;
        if let Some(bound) = taylor_bound(&deg) {
            for l in Multi::with_par_deg_at_most(bound) {
                for mm in Multi::with_par_deg_at_most(bound - l.par_deg()) {
                    let coeff = Rat::one() / rat_int(l.factorial() * mm.factorial());
                    let planted = Tree::planted(a.shift(l.add(mm)), child.clone());
                    part.add_term(Tree::poly(l), Tree::poly(mm).product(&planted)?, coeff);
                }
            }
        }
        acc = acc.product(&part)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Antipode on T⁺
// ---------------------------------------------------------------------------

/// Memo table for the antipode; it is worth sharing across calls when
/// re-expansion characters are evaluated repeatedly.
#[derive(Default)]
pub struct HopfCache {
    splus: HashMap<Tree, LinComb>,
}

/// Antipode `S⁺` on `T⁺`, determined by the counit recursion
/// `S⁺(τ) = -τ - Σ S⁺(τ') τ''` over the reduced coproduct, extended
/// multiplicatively.
pub fn antipode_plus(m: &Tree, d: &Degrees) -> Result<LinComb> {
    let mut cache = HopfCache::default();
    antipode_plus_cached(&mut cache, m, d)
}

pub fn antipode_plus_cached(cache: &mut HopfCache, m: &Tree, d: &Degrees) -> Result<LinComb> {
    ensure_positive_monomial(m, d)?;
    // Multiplicative split: polynomial part times planted generators.
    let sign = if (m.root_poly().k0 + m.root_poly().k1) % 2 == 0 { Rat::one() } else { -Rat::one() };
    let mut acc = LinComb::term(Tree::poly(m.root_poly()), sign);
    for (a, child) in m.children() {
        let gen = Tree::planted(*a, child.clone());
        let s = antipode_generator(cache, &gen, d)?;
        acc = acc.product(&s)?;
    }
    Ok(acc)
}

fn antipode_generator(cache: &mut HopfCache, gen: &Tree, d: &Degrees) -> Result<LinComb> {
    if let Some(hit) = cache.splus.get(gen) {
        return Ok(hit.clone());
    }
    let unit = Tree::unit();
    let mut acc = LinComb::term(gen.clone(), -Rat::one());
    let cp = coproduct_plus(gen, d)?;
    for ((l, r), c) in cp.terms() {
        if (l == gen && r.is_unit()) || (l.is_unit() && r == gen) {
            continue;
        }
        debug_assert!(!(l == gen && *r != unit) || r.is_unit());
        let sl = antipode_plus_cached(cache, l, d)?;
        for (t, ct) in sl.terms() {
            acc.add_term(t.product(r)?, -(c * ct));
        }
    }
    cache.splus.insert(gen.clone(), acc.clone());
    Ok(acc)
}

/// Counit: coefficient of the unit tree.
pub fn counit(v: &LinComb) -> Rat {
    v.coeff(&Tree::unit())
}

// ---------------------------------------------------------------------------
// Root extraction δ_r
// ---------------------------------------------------------------------------

struct Extraction {
    subtree: Tree,
    cuts: Vec<(EdgeLabel, Tree)>,
    leftover_poly: Multi,
    coeff: u128,
}

/// Enumerates every rooted subtree of `tau` containing the root, together
/// with the edges cut below it. Node polynomials split binomially between
/// the subtree and the contracted node; no derivative decorations are
/// transferred onto cut edges.
fn root_extractions(tau: &Tree) -> Vec<Extraction> {
    let (poly, noise, branches) = tau.root_parts();
    // Per-branch alternatives: keep the edge (descend) or cut it.
    let mut per_branch: Vec<Vec<BranchChoice>> = Vec::new();
    for (a, child) in branches {
        let mut alts = vec![BranchChoice::Cut(*a, child.clone())];
        for e in root_extractions(child) {
            alts.push(BranchChoice::Keep(*a, e));
        }
        per_branch.push(alts);
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_branch.len()];
    loop {
        for keep in poly.sub_indices() {
            let mut kept_children = Vec::new();
            let mut cuts = Vec::new();
            let mut leftover = poly.checked_sub(keep).unwrap();
            let mut coeff = poly.binomial(keep);
            for (slot, alts) in per_branch.iter().enumerate() {
                match &alts[idx[slot]] {
                    BranchChoice::Cut(a, t) => cuts.push((*a, t.clone())),
                    BranchChoice::Keep(a, e) => {
                        kept_children.push((*a, e.subtree.clone()));
                        cuts.extend(e.cuts.iter().cloned());
                        leftover = leftover.add(e.leftover_poly);
                        coeff *= e.coeff;
                    }
                }
            }
            out.push(Extraction {
                subtree: Tree::new(NodeDeco { noise, poly: keep }, kept_children),
                cuts,
                leftover_poly: leftover,
                coeff,
            });
        }
        // advance the mixed-radix counter over branch choices
        let mut i = 0;
        loop {
            if i == per_branch.len() {
                return out;
            }
            idx[i] += 1;
            if idx[i] < per_branch[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

enum BranchChoice {
    Cut(EdgeLabel, Tree),
    Keep(EdgeLabel, Extraction),
}

/// Root extraction: `δ_r(τ) = 1 ⊗ τ + Σ_σ σ ⊗ τ/σ` over rooted subtrees σ
/// sharing the root with `deg σ ≤ 0` and at least one noise, where `τ/σ`
/// contracts σ to a single node carrying the cut branches and the leftover
/// polynomial decorations.
pub fn delta_r(tau: &Tree, d: &Degrees) -> Result<TensorSum> {
    let mut out = TensorSum::single(Tree::unit(), tau.clone());
    for e in root_extractions(tau) {
        if e.subtree.noise_count() == 0 {
            continue;
        }
        if e.subtree.degree(d)? > Rat::zero() {
            continue;
        }
        let remainder = Tree::new(
            NodeDeco { noise: 0, poly: e.leftover_poly },
            e.cuts.clone(),
        );
        out.add_term(e.subtree, remainder, rat_int(e.coeff));
    }
    Ok(out)
}

/// Total multiplicity of non-trivial `δ_r` extractions: the number of root
/// subtree occurrences of non-positive degree (with their splitting
/// weights, which are 1 in the absence of polynomial decorations).
pub fn delta_r_extraction_count(tau: &Tree, d: &Degrees) -> Result<Rat> {
    let mut n = Rat::zero();
    for ((l, _), c) in delta_r(tau, d)?.terms() {
        if !l.is_unit() {
            n += c;
        }
    }
    Ok(n)
}

// ---------------------------------------------------------------------------
// Grafting product ⋆
// ---------------------------------------------------------------------------

/// Grafting `σ ⋆ τ` for `σ = X^k ∏ I_{a_i}(σ_i)`: every branch of σ is
/// attached to some node of τ and the polynomial decoration `k` is
/// distributed over the nodes of τ, summing over all choices.
pub fn graft(sigma: &Tree, tau: &Tree) -> Result<LinComb> {
    if !sigma.is_product_form() {
        return Err(Error::NotProductForm(sigma.to_string()));
    }
    let branches: Vec<(EdgeLabel, Tree)> = sigma.children().to_vec();
    let k = sigma.root_poly();
    let n = tau.node_count() as usize;
    let mut out = LinComb::zero();
    // assignments of branches to node indices (preorder)
    let mut assign = vec![0usize; branches.len()];
    loop {
        // distributions of k over n nodes
        for k0_parts in compositions(k.k0, n) {
            for k1_parts in compositions(k.k1, n) {
                let mut extra: Vec<(Multi, Vec<(EdgeLabel, Tree)>)> =
                    (0..n).map(|i| (Multi::new(k0_parts[i], k1_parts[i]), Vec::new())).collect();
                for (b, &site) in branches.iter().zip(&assign) {
                    extra[site].1.push(b.clone());
                }
                let mut counter = 0usize;
                let grafted = attach(tau, &extra, &mut counter);
                out.add_term(grafted, Rat::one());
            }
        }
        let mut i = 0;
        loop {
            if i == assign.len() {
                return Ok(out);
            }
            assign[i] += 1;
            if assign[i] < n {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
    }
}

fn compositions(total: u8, slots: usize) -> Vec<Vec<u8>> {
    if slots == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for rest in compositions(total - first, slots - 1) {
            let mut v = vec![first];
            v.extend(rest);
            out.push(v);
        }
    }
    out
}

fn attach(tau: &Tree, extra: &[(Multi, Vec<(EdgeLabel, Tree)>)], counter: &mut usize) -> Tree {
    let my = *counter;
    *counter += 1;
    let mut children: Vec<(EdgeLabel, Tree)> = Vec::new();
    for (e, c) in tau.children() {
        children.push((*e, attach(c, extra, counter)));
    }
    children.extend(extra[my].1.iter().cloned());
    let node = NodeDeco {
        noise: tau.root_noise(),
        poly: tau.root_poly().add(extra[my].0),
    };
    Tree::new(node, children)
}

// ---------------------------------------------------------------------------
// Characters
// ---------------------------------------------------------------------------

/// Coefficient of a character at one tree: a constant rational or a grid
/// sample of a smooth function of `x`.
#[derive(Clone)]
pub enum CoefFn {
    Const(Rat),
    Grid(GridFunction),
}

impl CoefFn {
    pub fn at(&self, x: Point) -> f64 {
        match self {
            CoefFn::Const(r) => crate::rat_to_f64(r),
            CoefFn::Grid(g) => g.eval(x.0, x.1),
        }
    }

    /// Exact value at `x`; grid samples embed as dyadic rationals.
    pub fn at_exact(&self, x: Point) -> Rat {
        match self {
            CoefFn::Const(r) => r.clone(),
            CoefFn::Grid(g) => rat_from_f64(g.eval(x.0, x.1)),
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, CoefFn::Const(_))
    }
}

impl fmt::Debug for CoefFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefFn::Const(r) => write!(f, "{r}"),
            CoefFn::Grid(_) => write!(f, "grid(·)"),
        }
    }
}

/// A multiplicative functional on the negative-tree algebra, possibly
/// depending on the spacetime point. Trees outside the stored support
/// evaluate to zero; the unit evaluates to one.
#[derive(Clone, Default, Debug)]
pub struct Character {
    support: BTreeMap<Tree, CoefFn>,
}

impl Character {
    pub fn counit() -> Character {
        Character::default()
    }

    pub fn from_entries(entries: Vec<(Tree, CoefFn)>) -> Character {
        Character { support: entries.into_iter().collect() }
    }

    pub fn insert(&mut self, tree: Tree, coef: CoefFn) {
        self.support.insert(tree, coef);
    }

    pub fn support(&self) -> impl Iterator<Item = (&Tree, &CoefFn)> {
        self.support.iter()
    }

    pub fn coef(&self, tree: &Tree) -> Option<&CoefFn> {
        self.support.get(tree)
    }

    pub fn is_const(&self) -> bool {
        self.support.values().all(|c| c.is_const())
    }

    /// Exact evaluation on a single tree.
    pub fn eval_exact(&self, x: Point, tree: &Tree) -> Rat {
        if tree.is_unit() {
            return Rat::one();
        }
        match self.support.get(tree) {
            Some(c) => c.at_exact(x),
            None => Rat::zero(),
        }
    }

    pub fn eval(&self, x: Point, tree: &Tree) -> f64 {
        if tree.is_unit() {
            return 1.0;
        }
        self.support.get(tree).map_or(0.0, |c| c.at(x))
    }

    /// Multiplicative extension to a forest given as a list of trees.
    pub fn eval_forest_exact(&self, x: Point, trees: &[Tree]) -> Rat {
        trees.iter().map(|t| self.eval_exact(x, t)).product()
    }

    /// Convolution `(ℓ ∘ ℓ̄)(x, τ) = Σ ℓ(x, σ) ℓ̄(x, τ/σ)` over `δ_r(τ)`,
    /// materialized on the given universe of trees. Only constant
    /// characters are composed exactly; grid coefficients would need a
    /// common grid.
    pub fn convolve(&self, other: &Character, universe: &[Tree], d: &Degrees) -> Result<Character> {
        let x = (0.0, 0.0);
        let mut out = Character::default();
        for t in universe {
            if t.is_unit() {
                continue;
            }
            let mut acc = Rat::zero();
            for ((sigma, rest), c) in delta_r(t, d)?.terms() {
                let v = self.eval_exact(x, sigma) * other.eval_exact(x, rest);
                acc += c * v;
            }
            if !acc.is_zero() {
                out.insert(t.clone(), CoefFn::Const(acc));
            }
        }
        Ok(out)
    }
}

/// Applies a character to the left slot of a tensor sum at the point `x`,
/// exactly.
pub fn char_apply_tensor(ell: &Character, t: &TensorSum, x: Point) -> LinComb {
    let mut out = LinComb::zero();
    for ((l, r), c) in t.terms() {
        let v = ell.eval_exact(x, l);
        if !v.is_zero() {
            out.add_term(r.clone(), c * v);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
