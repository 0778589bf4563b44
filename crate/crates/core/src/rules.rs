//! Equation specifications and generation of the tree basis they induce.
//!
//! A spec describes the system
//! `(∂_{x0} - a^i ∂²_{x1} - b^i ∂_{x1}) u_i = f^i(u) ξ + g^i(u, ∂_{x1}u)`
//! together with noise regularities and a degree cutoff. Conforming trees
//! are those produced by expanding the right-hand side: noise nodes carry
//! plain integration children from `f`, noise-free nodes carry plain and
//! first-derivative children from `g` (plus polynomial decorations), and
//! products of planted trees with polynomials close the set off.

use crate::expr::Expr;
use crate::multi::Multi;
use crate::trees::{Degrees, EdgeLabel, NodeDeco, Tree};
use crate::{parse_rat, Error, Rat, Result};
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Component {
    /// Second-order coefficient `a^i(x1)`, bounded away from zero.
    pub a: Arc<Expr>,
    /// Drift coefficient `b^i(x1)`.
    pub b: Arc<Expr>,
    /// Concrete nonlinearity `f^i(u)` (optional; only numerics need it).
    pub f: Option<Arc<Expr>>,
    /// Concrete nonlinearity `g^i(u, du)`.
    pub g: Option<Arc<Expr>>,
    /// Maximal number of integration children at a noise node
    /// (`None` = smooth `f`, bounded only by the cutoff).
    pub f_max_children: Option<u32>,
    /// Whether a `g(u, ∂u)` term is present at all.
    pub g_present: bool,
    /// Maximal number of derivative children at a noise-free node.
    pub g_du_max: Option<u32>,
    /// Maximal number of plain children at a noise-free node.
    pub g_u_max: Option<u32>,
}

#[derive(Clone, Debug)]
pub struct EquationSpec {
    pub components: Vec<Component>,
    /// Noise regularities `α_l` before the κ shift, `l = 1..n0`.
    pub noise_degrees: Vec<Rat>,
    /// Small positive shift subtracted from every noise degree.
    pub kappa: Rat,
    /// Degree cutoff: the basis holds every conforming tree of degree < γ.
    pub gamma: Rat,
    /// Cap on `|k|_s` for polynomial decorations.
    pub poly_cap: u32,
    /// Safety bound on node counts during generation.
    pub max_nodes: u32,
}

impl EquationSpec {
    pub fn n_components(&self) -> u8 {
        self.components.len() as u8
    }

    pub fn n_noises(&self) -> u8 {
        self.noise_degrees.len() as u8
    }

    /// Effective degree assignment (κ-shifted noises, β = 2).
    pub fn degrees(&self) -> Degrees {
        Degrees::new(self.noise_degrees.iter().map(|a| a - &self.kappa).collect())
    }

    /// Scalar multiplicative stochastic heat equation: `f(u) ξ`, no `g`.
    pub fn she(kappa: &str) -> EquationSpec {
        EquationSpec {
            components: vec![Component {
                a: Expr::parse("2 + 0.5*sin(x1)").unwrap(),
                b: Expr::parse("0.3*cos(x1)").unwrap(),
                f: Some(Expr::parse("u^2/2").unwrap()),
                g: None,
                f_max_children: None,
                g_present: false,
                g_du_max: None,
                g_u_max: None,
            }],
            noise_degrees: vec![parse_rat("-3/2").unwrap()],
            kappa: parse_rat(kappa).unwrap(),
            gamma: Rat::one(),
            poly_cap: 2,
            max_nodes: 10,
        }
    }

    /// Scalar generalized KPZ-type equation: `f(u) ξ + g(u, ∂u)` with a
    /// quadratic derivative nonlinearity.
    pub fn gkpz(kappa: &str) -> EquationSpec {
        EquationSpec {
            components: vec![Component {
                a: Expr::parse("2 + 0.5*sin(x1)").unwrap(),
                b: Expr::parse("0.3*cos(x1)").unwrap(),
                f: Some(Expr::parse("u^2/2").unwrap()),
                g: Some(Expr::parse("du^2").unwrap()),
                f_max_children: None,
                g_present: true,
                g_du_max: Some(2),
                g_u_max: None,
            }],
            noise_degrees: vec![parse_rat("-3/2").unwrap()],
            kappa: parse_rat(kappa).unwrap(),
            gamma: Rat::one(),
            poly_cap: 2,
            max_nodes: 10,
        }
    }
}

// ---------------------------------------------------------------------------
// JSON spec files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ComponentFile {
    a: String,
    b: String,
    #[serde(default)]
    f: Option<String>,
    #[serde(default)]
    g: Option<String>,
    #[serde(default)]
    f_max_children: Option<u32>,
    #[serde(default)]
    g_present: Option<bool>,
    #[serde(default)]
    g_du_max: Option<u32>,
    #[serde(default)]
    g_u_max: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct SpecFile {
    components: Vec<ComponentFile>,
    noise_degrees: Vec<String>,
    #[serde(default)]
    kappa: Option<String>,
    gamma: String,
    #[serde(default)]
    poly_cap: Option<u32>,
    #[serde(default)]
    max_nodes: Option<u32>,
}

impl EquationSpec {
    pub fn from_json(text: &str) -> Result<EquationSpec> {
        let file: SpecFile = serde_json::from_str(text)?;
        let mut components = Vec::new();
        for c in &file.components {
            let g_present = c.g_present.unwrap_or(c.g.is_some());
            components.push(Component {
                a: Expr::parse(&c.a)?,
                b: Expr::parse(&c.b)?,
                f: c.f.as_deref().map(Expr::parse).transpose()?,
                g: c.g.as_deref().map(Expr::parse).transpose()?,
                f_max_children: c.f_max_children,
                g_present,
                g_du_max: c.g_du_max,
                g_u_max: c.g_u_max,
            });
        }
        let spec = EquationSpec {
            components,
            noise_degrees: file
                .noise_degrees
                .iter()
                .map(|s| parse_rat(s))
                .collect::<Result<_>>()?,
            kappa: file.kappa.as_deref().map(parse_rat).transpose()?.unwrap_or_else(Rat::zero),
            gamma: parse_rat(&file.gamma)?,
            poly_cap: file.poly_cap.unwrap_or(2),
            max_nodes: file.max_nodes.unwrap_or(10),
        };
        let diags = validate_spec(&spec);
        if let Some(fatal) = diags.iter().find(|d| d.fatal) {
            return Err(Error::Spec(fatal.message.clone()));
        }
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<EquationSpec> {
        EquationSpec::from_json(&std::fs::read_to_string(path)?)
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct Diagnostic {
    pub fatal: bool,
    pub message: String,
}

/// Checks ellipticity of each `a^i` by dense sampling, subcriticality of
/// the degree assignment and cutoff sanity. Returns diagnostics instead of
/// failing so callers can report everything at once.
pub fn validate_spec(spec: &EquationSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, c) in spec.components.iter().enumerate() {
        for v in c.a.variables() {
            if v != "x1" {
                out.push(Diagnostic {
                    fatal: true,
                    message: format!("component {}: coefficient a depends on {v}; only x1-dependent coefficients are supported", i + 1),
                });
            }
        }
        for v in c.b.variables() {
            if v != "x1" {
                out.push(Diagnostic {
                    fatal: true,
                    message: format!("component {}: coefficient b depends on {v}; only x1-dependent coefficients are supported", i + 1),
                });
            }
        }
        let n = 512;
        let min_a = (0..n)
            .map(|j| c.a.eval1("x1", crate::TORUS_LEN * j as f64 / n as f64))
            .fold(f64::INFINITY, f64::min);
        if !(min_a > 1e-6) {
            out.push(Diagnostic {
                fatal: true,
                message: format!(
                    "component {}: ellipticity failure, min a(x1) = {min_a:.3e} on the torus",
                    i + 1
                ),
            });
        }
    }
    if spec.gamma <= Rat::zero() {
        out.push(Diagnostic { fatal: true, message: "degree cutoff gamma must be positive".into() });
    }
    if spec.kappa < Rat::zero() {
        out.push(Diagnostic { fatal: true, message: "kappa shift must be non-negative".into() });
    }
    let d = spec.degrees();
    // Subcriticality: a plain integration edge must strictly gain degree on
    // the worst noise.
    let beta = &d.beta;
    for (l, _) in spec.noise_degrees.iter().enumerate() {
        let alpha = d.noise_degree(l as u8 + 1).unwrap();
        if &alpha + beta <= Rat::zero() {
            out.push(Diagnostic {
                fatal: true,
                message: format!(
                    "subcriticality failure: noise {} has degree {alpha} and an integration edge gains only {beta}",
                    l + 1
                ),
            });
        }
    }
    // Unbounded fan-in with degree-decreasing derivative branches never
    // terminates.
    for (i, c) in spec.components.iter().enumerate() {
        if c.g_present && c.g_du_max.is_none() {
            let worst = spec
                .noise_degrees
                .iter()
                .map(|a| a - &spec.kappa)
                .fold(Rat::zero(), |m, a| if a < m { a } else { m });
            if &worst + beta - Rat::one() < Rat::zero() {
                out.push(Diagnostic {
                    fatal: true,
                    message: format!(
                        "component {}: derivative branches lose degree but g_du_max is unbounded; generation would not terminate",
                        i + 1
                    ),
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Basis generation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BasisEntry {
    pub tree: Tree,
    pub degree: Rat,
}

#[derive(Clone, Debug)]
pub struct Basis {
    /// All conforming trees with degree < γ, sorted by (degree, encoding).
    pub entries: Vec<BasisEntry>,
    /// Indices into `entries` of trees with `deg ≤ 0` and at least one noise.
    pub negative: Vec<usize>,
}

impl Basis {
    pub fn trees(&self) -> impl Iterator<Item = &Tree> {
        self.entries.iter().map(|e| &e.tree)
    }

    pub fn negative_trees(&self) -> impl Iterator<Item = &Tree> {
        self.negative.iter().map(|&i| &self.entries[i].tree)
    }

    pub fn contains(&self, t: &Tree) -> bool {
        self.entries.iter().any(|e| &e.tree == t)
    }

    pub fn contains_negative(&self, t: &Tree) -> bool {
        self.negative_trees().any(|u| u == t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Whether a tree conforms to the rule of the equation. The component a
/// subtree feeds into is fixed by the sort of the edge above it; trees at
/// the top level are accepted if they conform for some component.
pub fn conforms(spec: &EquationSpec, tree: &Tree) -> bool {
    (1..=spec.n_components()).any(|i| conforms_for(spec, tree, i))
}

fn conforms_for(spec: &EquationSpec, tree: &Tree, component: u8) -> bool {
    let c = &spec.components[component as usize - 1];
    let (poly, noise, branches) = tree.root_parts();
    if noise > spec.n_noises() {
        return false;
    }
    if noise != 0 {
        // Noise node from f^i(u)ξ: no polynomial decoration, plain edges only.
        if !poly.is_zero() {
            return false;
        }
        if let Some(max) = c.f_max_children {
            if branches.len() as u32 > max {
                return false;
            }
        }
        branches.iter().all(|(e, t)| {
            e.deriv.is_zero()
                && e.sort >= 1
                && e.sort <= spec.n_components()
                && conforms_for(spec, t, e.sort)
        })
    } else {
        // Noise-free node: polynomial decorations up to the cap; children
        // only when a g-term is declared.
        if poly.par_deg() > spec.poly_cap {
            return false;
        }
        let mut du_children = 0u32;
        let mut u_children = 0u32;
        for (e, t) in branches {
            if e.sort < 1 || e.sort > spec.n_components() {
                return false;
            }
            match (e.deriv.k0, e.deriv.k1) {
                (0, 0) => u_children += 1,
                (0, 1) => {
                    if !c.g_present {
                        return false;
                    }
                    du_children += 1;
                }
                _ => return false,
            }
            if !conforms_for(spec, t, e.sort) {
                return false;
            }
        }
        if let Some(max) = c.g_du_max {
            if du_children > max {
                return false;
            }
        }
        if let Some(max) = c.g_u_max {
            if u_children > max {
                return false;
            }
        }
        // A bare polynomial is fine; children at a noise-free node require g,
        // except that a single plain branch is a planted tree (an element of
        // the solution expansion) and is always admitted.
        if !branches.is_empty() && !c.g_present {
            return branches.iter().all(|(e, _)| e.deriv.is_zero());
        }
        true
    }
}

/// Generates every conforming tree with degree < γ (and at most
/// `max_nodes` nodes), sorted by (degree, encoding), together with the
/// negative sub-basis.
pub fn generate_basis(spec: &EquationSpec) -> Result<Basis> {
    let diags = validate_spec(spec);
    if let Some(fatal) = diags.iter().find(|d| d.fatal) {
        return Err(Error::Spec(fatal.message.clone()));
    }
    let d = spec.degrees();
    let mut pool: BTreeSet<Tree> = BTreeSet::new();
    // Seeds: unit, polynomials, bare noises.
    for k in Multi::with_par_deg_at_most(spec.poly_cap) {
        let t = Tree::poly(k);
        if t.degree(&d)? < spec.gamma {
            pool.insert(t);
        }
    }
    for l in 1..=spec.n_noises() {
        let t = Tree::noise(l);
        if t.degree(&d)? < spec.gamma {
            pool.insert(t);
        }
    }
    // Close under attaching children and polynomial decorations, level by
    // level; subtrees of conforming trees are conforming, so building from
    // the pool reaches everything under the node bound.
    loop {
        let snapshot: Vec<Tree> = pool.iter().cloned().collect();
        let mut added = false;
        for root_noise in 0..=spec.n_noises() {
            let polys: Vec<Multi> = if root_noise == 0 {
                Multi::with_par_deg_at_most(spec.poly_cap)
            } else {
                vec![Multi::ZERO]
            };
            for base in &snapshot {
                // Attach one more branch to an existing conforming tree whose
                // root matches; iterating this grows all finite fan-ins.
                if base.root_noise() != root_noise {
                    continue;
                }
                for sort in 1..=spec.n_components() {
                    let derivs: &[Multi] = if root_noise == 0
                        && spec.components[sort as usize - 1].g_present
                    {
                        &[Multi::ZERO, Multi { k0: 0, k1: 1 }]
                    } else {
                        &[Multi::ZERO]
                    };
                    for &deriv in derivs {
                        for sub in &snapshot {
                            if sub.noise_count() == 0 && sub.root_poly().is_zero() && sub.children().is_empty() {
                                continue; // never plant the bare unit
                            }
                            if sub.noise_count() == 0 {
                                continue; // planted polynomials are excluded from T
                            }
                            let mut children = base.children().to_vec();
                            children.push((EdgeLabel::new(sort, deriv), sub.clone()));
                            let cand = Tree::new(
                                NodeDeco { noise: root_noise, poly: base.root_poly() },
                                children,
                            );
                            if cand.node_count() > spec.max_nodes {
                                continue;
                            }
                            if cand.degree(&d)? >= spec.gamma {
                                continue;
                            }
                            if !conforms(spec, &cand) {
                                continue;
                            }
                            if pool.insert(cand) {
                                added = true;
                            }
                        }
                    }
                }
                // Polynomial decorations on noise-free roots.
                if root_noise == 0 {
                    for &k in &polys {
                        if k.is_zero() {
                            continue;
                        }
                        let cand = base.with_root_poly(k);
                        if cand.degree(&d)? >= spec.gamma || !conforms(spec, &cand) {
                            continue;
                        }
                        if cand.node_count() <= spec.max_nodes && pool.insert(cand) {
                            added = true;
                        }
                    }
                }
            }
        }
        if !added {
            break;
        }
    }
    let mut entries: Vec<BasisEntry> = pool
        .into_iter()
        .map(|tree| {
            let degree = tree.degree(&d).unwrap();
            BasisEntry { tree, degree }
        })
        .collect();
    entries.sort_by(|a, b| a.degree.cmp(&b.degree).then_with(|| a.tree.cmp(&b.tree)));
    let negative = entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.degree <= Rat::zero() && e.tree.noise_count() >= 1)
        .map(|(i, _)| i)
        .collect();
    Ok(Basis { entries, negative })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::parse;

    #[test]
    fn she_negative_basis() {
        let spec = EquationSpec::she("1/100");
        let basis = generate_basis(&spec).unwrap();
        let want = [
            "z1",
            "z1 I[1,(0,0)](z1)",
            "z1 I[1,(0,0)](z1) I[1,(0,0)](z1)",
            "z1 I[1,(0,0)](z1) I[1,(0,0)](z1) I[1,(0,0)](z1)",
        ];
        for w in want {
            let t = parse(w).unwrap();
            assert!(basis.contains_negative(&t), "missing {t} from B⁻");
        }
        assert_eq!(basis.negative.len(), want.len(), "B⁻ = {:?}", basis.negative_trees().collect::<Vec<_>>());
        // Expected degrees: -3/2-κ, -1-2κ, -1/2-3κ, -4κ.
        let d = spec.degrees();
        let degs: Vec<Rat> = basis.negative_trees().map(|t| t.degree(&d).unwrap()).collect();
        let expect = ["-151/100", "-102/100", "-53/100", "-4/100"];
        for (got, want) in degs.iter().zip(expect) {
            assert_eq!(got, &crate::parse_rat(want).unwrap());
        }
    }

    #[test]
    fn cutoff_below_noises_leaves_no_compounds() {
        let mut spec = EquationSpec::she("0");
        spec.gamma = crate::parse_rat("-2").unwrap();
        // gamma must be positive; generation refuses.
        assert!(generate_basis(&spec).is_err());
        // With γ slightly above the noise degree only the noise survives.
        spec.gamma = crate::parse_rat("-7/5").unwrap();
        assert!(generate_basis(&spec).is_err());
    }

    #[test]
    fn no_noise_spec_gives_polynomials_only() {
        let mut spec = EquationSpec::she("0");
        spec.noise_degrees.clear();
        let basis = generate_basis(&spec).unwrap();
        assert!(basis.entries.iter().all(|e| e.tree.noise_count() == 0));
        assert!(basis.negative.is_empty());
        assert!(basis.contains(&Tree::unit()));
        assert!(basis.contains(&Tree::poly(Multi::new(0, 1))));
    }

    #[test]
    fn ellipticity_diagnostics() {
        let mut spec = EquationSpec::she("0");
        assert!(validate_spec(&spec).iter().all(|d| !d.fatal));
        spec.components[0].a = Expr::parse("sin(x1)").unwrap();
        assert!(validate_spec(&spec).iter().any(|d| d.fatal && d.message.contains("ellipticity")));
    }

    #[test]
    fn subcriticality_diagnostic() {
        let mut spec = EquationSpec::she("0");
        spec.noise_degrees = vec![crate::parse_rat("-2").unwrap()];
        assert!(validate_spec(&spec)
            .iter()
            .any(|d| d.fatal && d.message.contains("subcriticality")));
    }

    #[test]
    fn generation_is_deterministic_and_sorted() {
        let spec = EquationSpec::gkpz("1/100");
        let a = generate_basis(&spec).unwrap();
        let b = generate_basis(&spec).unwrap();
        let ta: Vec<&Tree> = a.trees().collect();
        let tb: Vec<&Tree> = b.trees().collect();
        assert_eq!(ta, tb);
        for w in a.entries.windows(2) {
            assert!(w[0].degree <= w[1].degree);
        }
    }

    #[test]
    fn gkpz_negative_basis_contains_derivative_trees() {
        let spec = EquationSpec::gkpz("1/100");
        let basis = generate_basis(&spec).unwrap();
        for text in [
            "z0 I[1,(0,1)](z1)",
            "z0 I[1,(0,1)](z1) I[1,(0,1)](z1)",
            "z1 I[1,(0,0)](z0 I[1,(0,1)](z1))",
        ] {
            let t = parse(text).unwrap();
            assert!(basis.contains_negative(&t), "missing {t} from gKPZ B⁻");
        }
    }

    #[test]
    fn negative_basis_invariants() {
        let spec = EquationSpec::gkpz("1/100");
        let basis = generate_basis(&spec).unwrap();
        let d = spec.degrees();
        for t in basis.negative_trees() {
            assert!(t.noise_count() >= 1);
            assert!(t.degree(&d).unwrap() <= Rat::zero());
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "components": [{"a": "2 + 0.5*sin(x1)", "b": "0.3*cos(x1)", "f": "u^2/2"}],
            "noise_degrees": ["-3/2"],
            "kappa": "1/100",
            "gamma": "1"
        }"#;
        let spec = EquationSpec::from_json(text).unwrap();
        assert_eq!(spec.n_components(), 1);
        let basis = generate_basis(&spec).unwrap();
        assert_eq!(basis.negative.len(), 4);
    }
}
