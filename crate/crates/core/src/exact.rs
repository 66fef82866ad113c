//! Closed-form laws used as oracles: branching tables, trunk colour laws,
//! coloured-shape probabilities, leaf-count pmf and enumeration.
//!
//! The table and shape formulas are generic over [`num_traits::Num`], so
//! they can be evaluated in `f64` or exactly in `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Zero};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::forest::{Color, PlaneTree};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("parameters out of order: {0}")]
    Ordering(String),
    #[error("invalid coloured shape: {0}")]
    InvalidShape(String),
    #[error("enumeration bound {0} exceeds the supported maximum of 8 leaves")]
    BoundExceeded(usize),
    #[error("leaf count must be at least 1")]
    ZeroLeaves,
    #[error("branching probability {0} is outside (0, 1/2]")]
    Supercritical(f64),
    #[error("{0} is too large for an exact count")]
    Overflow(usize),
}

fn two<T: Num + Clone>() -> T {
    T::one() + T::one()
}

/// Checks `0 <= lambda <= mu <= theta` with `lambda < theta`. The closed
/// endpoints are accepted as limiting cases.
fn check_triple<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    lambda: &T,
    mu: &T,
    theta: &T,
) -> Result<(), ExactError> {
    if *lambda < T::zero() || lambda > mu || mu > theta || lambda >= theta {
        return Err(ExactError::Ordering(format!(
            "need 0 <= lambda <= mu <= theta, lambda < theta; got {lambda:?}, {mu:?}, {theta:?}"
        )));
    }
    Ok(())
}

pub fn branching_prob(lambda: f64, mu: f64) -> Result<f64, ExactError> {
    if !(lambda >= 0.0 && lambda < mu && mu.is_finite()) {
        return Err(ExactError::Ordering(format!(
            "need 0 <= lambda < mu, got {lambda}, {mu}"
        )));
    }
    Ok((mu - lambda) / (2.0 * mu))
}

/// Red-leaf probability `(θ² − µ²)/(θ² − λ²)`.
pub fn q_of<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    lambda: T,
    mu: T,
    theta: T,
) -> Result<T, ExactError> {
    check_triple(&lambda, &mu, &theta)?;
    let t2 = theta.clone() * theta;
    Ok((t2.clone() - mu.clone() * mu) / (t2 - lambda.clone() * lambda))
}

/// Inverse of [`q_of`] in `µ`: `µ = sqrt(q λ² + (1 − q) θ²)`.
pub fn mu_of_q(lambda: f64, theta: f64, q: f64) -> Result<f64, ExactError> {
    if !(lambda >= 0.0 && lambda < theta && (0.0..=1.0).contains(&q)) {
        return Err(ExactError::Ordering(format!(
            "need 0 <= lambda < theta and q in [0, 1], got {lambda}, {theta}, {q}"
        )));
    }
    Ok((q * lambda * lambda + (1.0 - q) * theta * theta).sqrt())
}

/// Offspring law of composite branches, by colour.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchingTable<T> {
    pub red_split: T,
    pub red_leaf: T,
    pub black_red_black: T,
    pub black_black_red: T,
    pub black_black_black: T,
    pub black_leaf: T,
}

impl<T: Num + Clone> BranchingTable<T> {
    pub fn red_row(&self) -> [T; 2] {
        [self.red_split.clone(), self.red_leaf.clone()]
    }

    pub fn black_row(&self) -> [T; 4] {
        [
            self.black_red_black.clone(),
            self.black_black_red.clone(),
            self.black_black_black.clone(),
            self.black_leaf.clone(),
        ]
    }
}

pub fn branching_table<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    lambda: T,
    mu: T,
    theta: T,
) -> Result<BranchingTable<T>, ExactError> {
    check_triple(&lambda, &mu, &theta)?;
    let d = two::<T>() * theta.clone();
    let split = (theta.clone() - mu.clone()) / d.clone();
    Ok(BranchingTable {
        red_split: split.clone(),
        red_leaf: (theta + mu.clone()) / d.clone(),
        black_red_black: split.clone(),
        black_black_red: split,
        black_black_black: (mu.clone() - lambda.clone()) / d.clone(),
        black_leaf: (mu + lambda) / d,
    })
}

/// Colour law of the first trunk of a composite forest.
#[derive(Clone, Debug, PartialEq)]
pub struct TrunkLaw<T> {
    pub red: T,
    pub black: T,
    /// Probability a first subbranch is red, given the trunk branches.
    pub sub_red_given_split: T,
    pub both_red_given_split: T,
    /// Probability the trunk is red, given it is a leaf.
    pub red_given_leaf: T,
}

pub fn trunk_law<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    lambda: T,
    mu: T,
    theta: T,
) -> Result<TrunkLaw<T>, ExactError> {
    check_triple(&lambda, &mu, &theta)?;
    let span = theta.clone() - lambda.clone();
    let red = (theta.clone() - mu.clone()) / span.clone();
    Ok(TrunkLaw {
        black: (mu.clone() - lambda.clone()) / span,
        sub_red_given_split: red.clone(),
        both_red_given_split: red.clone() * red.clone(),
        red_given_leaf: q_of(lambda, mu, theta)?,
        red,
    })
}

/// Unit-length tree whose internal colours follow the spanning rule: a
/// branch is black iff some leaf above it is black.
#[derive(Clone, Debug, PartialEq)]
pub struct ColoredShape {
    tree: PlaneTree,
}

impl ColoredShape {
    /// Colours `shape`'s leaves (in DFS order) and spans the black ones.
    pub fn from_leaf_colors(shape: &PlaneTree, leaf_colors: &[Color]) -> Result<Self, ExactError> {
        if shape.leaf_count() != leaf_colors.len() {
            return Err(ExactError::InvalidShape(format!(
                "{} leaves but {} colours",
                shape.leaf_count(),
                leaf_colors.len()
            )));
        }
        let mut tree = shape.shape_of();
        for (leaf, c) in tree
            .leaves()
            .collect::<Vec<_>>()
            .into_iter()
            .zip(leaf_colors)
        {
            tree.set_color(leaf, Some(*c));
        }
        for i in tree.postorder() {
            if let Some((l, r)) = tree.children(i) {
                let black = tree.node(l).color == Some(Color::Black)
                    || tree.node(r).color == Some(Color::Black);
                tree.set_color(i, Some(if black { Color::Black } else { Color::Red }));
            }
        }
        Ok(ColoredShape { tree })
    }

    /// The coloured shape of a fully coloured tree.
    pub fn from_tree(tree: &PlaneTree) -> Result<Self, ExactError> {
        let colors: Option<Vec<Color>> = tree.leaves().map(|i| tree.node(i).color).collect();
        let colors =
            colors.ok_or_else(|| ExactError::InvalidShape("tree is not coloured".into()))?;
        let s = Self::from_leaf_colors(tree, &colors)?;
        let consistent = s
            .tree
            .nodes()
            .iter()
            .zip(tree.nodes())
            .all(|(a, b)| a.color == b.color);
        if !consistent {
            return Err(ExactError::InvalidShape(
                "internal colours do not span the black leaves".into(),
            ));
        }
        Ok(s)
    }

    pub fn tree(&self) -> &PlaneTree {
        &self.tree
    }

    pub fn leaves(&self) -> usize {
        self.tree.leaf_count()
    }

    pub fn black_leaves(&self) -> usize {
        self.tree
            .leaves()
            .filter(|&i| self.tree.node(i).color == Some(Color::Black))
            .count()
    }

    pub fn key(&self) -> String {
        self.tree.shape_key()
    }
}

/// The two routes to the probability that the first composite tree has a
/// given coloured shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ColoredProb<T> {
    /// Trunk colour law times the offspring table entry of every branch.
    pub composite: T,
    /// Uncoloured (λ, θ) shape probability times i.i.d. leaf colours.
    pub colored: T,
}

pub fn colored_tree_prob<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    t: &ColoredShape,
    lambda: T,
    mu: T,
    theta: T,
) -> Result<ColoredProb<T>, ExactError> {
    let table = branching_table(lambda.clone(), mu.clone(), theta.clone())?;
    let trunk = trunk_law(lambda.clone(), mu.clone(), theta.clone())?;
    let tree = &t.tree;
    let color = |i: usize| tree.node(i).color.unwrap();
    let mut composite = match color(0) {
        Color::Red => trunk.red,
        Color::Black => trunk.black,
    };
    for i in 0..tree.node_count() {
        let factor = match (color(i), tree.children(i)) {
            (Color::Red, None) => &table.red_leaf,
            (Color::Red, Some(_)) => &table.red_split,
            (Color::Black, None) => &table.black_leaf,
            (Color::Black, Some((l, r))) => match (color(l), color(r)) {
                (Color::Red, Color::Black) => &table.black_red_black,
                (Color::Black, Color::Red) => &table.black_black_red,
                (Color::Black, Color::Black) => &table.black_black_black,
                (Color::Red, Color::Red) => {
                    return Err(ExactError::InvalidShape(
                        "black branch with red children".into(),
                    ))
                }
            },
        };
        composite = composite * factor.clone();
    }
    let n = t.leaves();
    let k = t.black_leaves();
    let p = shape_prob(n, lambda.clone(), theta.clone());
    let q = q_of(lambda, mu, theta)?;
    let colored = p * pow(q.clone(), n - k) * pow(T::one() - q, k);
    Ok(ColoredProb { composite, colored })
}

/// Closed form of the composite route in terms of the leaf count `n` and
/// black leaf count `k` only.
pub fn colored_prob_by_counts<T: Num + Clone + PartialOrd + std::fmt::Debug>(
    n: usize,
    k: usize,
    lambda: T,
    mu: T,
    theta: T,
) -> Result<T, ExactError> {
    check_triple(&lambda, &mu, &theta)?;
    if n == 0 || k > n {
        return Err(ExactError::InvalidShape(format!("n={n}, k={k}")));
    }
    let d = two::<T>() * theta.clone();
    let span = theta.clone() - lambda.clone();
    let red_split = (theta.clone() - mu.clone()) / d.clone();
    let red_leaf = (theta.clone() + mu.clone()) / d.clone();
    if k == 0 {
        return Ok((theta - mu) / span * pow(red_split, n - 1) * pow(red_leaf, n));
    }
    let bb = (mu.clone() - lambda.clone()) / d.clone();
    let bl = (mu.clone() + lambda.clone()) / d;
    Ok((mu - lambda) / span
        * pow(red_split, n - k)
        * pow(bb, k - 1)
        * pow(red_leaf, n - k)
        * pow(bl, k))
}

/// Probability of one particular uncoloured shape with `n` leaves in a
/// binary(λ, θ) tree.
pub fn shape_prob<T: Num + Clone>(n: usize, lambda: T, theta: T) -> T {
    let d = two::<T>() * theta.clone();
    let split = (theta.clone() - lambda.clone()) / d.clone();
    let leaf = (theta + lambda) / d;
    pow(split, n - 1) * pow(leaf, n)
}

fn pow<T: Num + Clone>(x: T, k: usize) -> T {
    num_traits::pow::pow(x, k)
}

fn catalan(m: usize) -> Option<u128> {
    let mut c: u128 = 1;
    for i in 0..m as u128 {
        // C_{i+1} = C_i * 2(2i+1)/(i+2); the product is exactly divisible
        c = c.checked_mul(2 * (2 * i + 1))? / (i + 2);
    }
    Some(c)
}

/// Number of binary plane shapes with `n` leaves.
pub fn shape_count(n: usize) -> Result<u128, ExactError> {
    if n == 0 {
        return Err(ExactError::ZeroLeaves);
    }
    catalan(n - 1).ok_or(ExactError::Overflow(n))
}

fn ln_shape_count(n: usize) -> f64 {
    let m = (n - 1) as f64;
    ln_gamma(2.0 * m + 1.0) - ln_gamma(m + 1.0) - ln_gamma(m + 2.0)
}

/// Probability that a binary tree with branching probability `p` has
/// exactly `n` leaves.
pub fn leaf_count_pmf(n: usize, p: f64) -> Result<f64, ExactError> {
    if n == 0 {
        return Err(ExactError::ZeroLeaves);
    }
    if !(p > 0.0 && p <= 0.5) {
        return Err(ExactError::Supercritical(p));
    }
    let m = (n - 1) as f64;
    if n <= 60 {
        let c = catalan(n - 1).unwrap() as f64;
        return Ok(c * p.powf(m) * (1.0 - p).powi(n as i32));
    }
    Ok((ln_shape_count(n) + m * p.ln() + n as f64 * (1.0 - p).ln()).exp())
}

/// `P(leaves <= n)`.
pub fn leaf_count_cdf(n: usize, p: f64) -> Result<f64, ExactError> {
    (1..=n).map(|k| leaf_count_pmf(k, p)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    /// Rate of the fall before the first marked point.
    pub r: f64,
    pub r_prime: f64,
    /// Mass of excursions that never return, for the reversed walk.
    pub nu_inf_mass: f64,
}

pub fn rates(lambda: f64, mu: f64, theta: f64) -> Result<Rates, ExactError> {
    check_triple(&lambda, &mu, &theta)?;
    Ok(Rates {
        r: mu - lambda,
        r_prime: mu + lambda,
        nu_inf_mass: 2.0 * lambda / (theta + lambda),
    })
}

/// Every binary shape with exactly `n` leaves, in a fixed order.
pub fn enumerate_shapes(n: usize) -> Vec<PlaneTree> {
    let mut by_size: Vec<Vec<PlaneTree>> = vec![Vec::new(), vec![PlaneTree::leaf(1.0, None)]];
    for size in 2..=n {
        let mut out = Vec::new();
        for left in 1..size {
            for l in &by_size[left] {
                for r in &by_size[size - left] {
                    out.push(PlaneTree::join(1.0, None, l.clone(), r.clone()));
                }
            }
        }
        by_size.push(out);
    }
    by_size.swap_remove(n.max(1).min(by_size.len() - 1))
}

/// All coloured shapes with at most `max_leaves` leaves: for each leaf
/// count, each shape, each of the 2^n leaf colourings.
pub fn enumerate_colored_shapes(max_leaves: usize) -> Result<Vec<ColoredShape>, ExactError> {
    if max_leaves == 0 {
        return Err(ExactError::ZeroLeaves);
    }
    if max_leaves > 8 {
        return Err(ExactError::BoundExceeded(max_leaves));
    }
    let mut out = Vec::new();
    for n in 1..=max_leaves {
        for shape in enumerate_shapes(n) {
            for mask in 0u32..(1 << n) {
                let colors: Vec<Color> = (0..n)
                    .map(|j| {
                        if mask >> j & 1 == 1 {
                            Color::Black
                        } else {
                            Color::Red
                        }
                    })
                    .collect();
                out.push(ColoredShape::from_leaf_colors(&shape, &colors)?);
            }
        }
    }
    Ok(out)
}

/// A named reference value with its formula, for reports.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactLaw {
    pub name: &'static str,
    pub formula: &'static str,
    pub value: f64,
}

pub fn reference_values(lambda: f64, mu: f64, theta: f64) -> Result<Vec<ExactLaw>, ExactError> {
    let t = branching_table(lambda, mu, theta)?;
    let tr = trunk_law(lambda, mu, theta)?;
    let r = rates(lambda, mu, theta)?;
    let law = |name, formula, value| ExactLaw {
        name,
        formula,
        value,
    };
    Ok(vec![
        law(
            "q",
            "(theta^2-mu^2)/(theta^2-lambda^2)",
            q_of(lambda, mu, theta)?,
        ),
        law("red_split", "(theta-mu)/(2 theta)", t.red_split),
        law("red_leaf", "(theta+mu)/(2 theta)", t.red_leaf),
        law("black_red_black", "(theta-mu)/(2 theta)", t.black_red_black),
        law("black_black_red", "(theta-mu)/(2 theta)", t.black_black_red),
        law(
            "black_black_black",
            "(mu-lambda)/(2 theta)",
            t.black_black_black,
        ),
        law("black_leaf", "(mu+lambda)/(2 theta)", t.black_leaf),
        law("trunk_red", "(theta-mu)/(theta-lambda)", tr.red),
        law("trunk_black", "(mu-lambda)/(theta-lambda)", tr.black),
        law(
            "sub_red_given_split",
            "(theta-mu)/(theta-lambda)",
            tr.sub_red_given_split,
        ),
        law(
            "both_red_given_split",
            "((theta-mu)/(theta-lambda))^2",
            tr.both_red_given_split,
        ),
        law(
            "red_given_leaf",
            "(theta^2-mu^2)/(theta^2-lambda^2)",
            tr.red_given_leaf,
        ),
        law("r", "mu-lambda", r.r),
        law("r_prime", "mu+lambda", r.r_prime),
        law("nu_inf_mass", "2 lambda/(theta+lambda)", r.nu_inf_mass),
    ])
}

/// Exact rational from a small integer ratio.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Sum of a slice of exact values.
pub fn sum_exact(xs: &[BigRational]) -> BigRational {
    xs.iter().fold(BigRational::zero(), |a, b| a + b)
}

pub fn is_one(x: &BigRational) -> bool {
    x.is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn branching_prob_values() {
        assert_eq!(branching_prob(0.0, 1.0).unwrap(), 0.5);
        assert!(close(branching_prob(1.0, 3.0).unwrap(), 1.0 / 3.0, 1e-15));
        assert!(branching_prob(1.0 - 1e-12, 1.0).unwrap() < 1e-11);
        assert!(branching_prob(2.0, 1.0).is_err());
    }

    #[test]
    fn q_and_inverse() {
        assert_eq!(q_of(0.0, 1.0, 2.0).unwrap(), 0.75);
        assert_eq!(
            q_of(ratio(0, 1), ratio(1, 1), ratio(2, 1)).unwrap(),
            ratio(3, 4)
        );
        for &(l, m, t) in &[(0.0, 1.0, 2.0), (1.0, 2.0, 4.0), (0.3, 0.9, 1.7)] {
            let q = q_of(l, m, t).unwrap();
            assert!(close(mu_of_q(l, t, q).unwrap(), m, 1e-14));
        }
        assert_eq!(q_of(1.0, 4.0, 4.0).unwrap(), 0.0);
        assert!(q_of(0.0, 3.0, 2.0).is_err());
    }

    #[test]
    fn table_at_reference_point() {
        let t = branching_table(0.0, 1.0, 2.0).unwrap();
        assert_eq!(t.black_row(), [0.25; 4]);
        assert_eq!(t.red_row(), [0.25, 0.75]);
        let edge = branching_table(1.0, 1.0, 2.0).unwrap();
        assert_eq!(edge.black_black_black, 0.0);
    }

    #[test]
    fn rows_sum_to_one_exactly() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed >> 40) as i64 % 97 + 1
        };
        for _ in 0..100 {
            let mut v = [next(), next(), next()];
            v.sort();
            let (l, m, t) = (ratio(v[0] - 1, 7), ratio(v[1], 7), ratio(v[2] + 1, 7));
            let tab = branching_table(l, m, t).unwrap();
            assert!(is_one(&sum_exact(&tab.red_row())));
            assert!(is_one(&sum_exact(&tab.black_row())));
            let f = branching_table(v[0] as f64 - 1.0, v[1] as f64, v[2] as f64 + 1.0).unwrap();
            assert!((f.black_row().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
            assert!((f.red_row().iter().sum::<f64>() - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn trunk_law_identities() {
        let tr = trunk_law(0.0, 1.0, 2.0).unwrap();
        assert_eq!(tr.red, 0.5);
        assert_eq!(
            tr.both_red_given_split,
            tr.sub_red_given_split * tr.sub_red_given_split
        );
        assert_eq!(tr.red_given_leaf, q_of(0.0, 1.0, 2.0).unwrap());
        let ex = trunk_law(ratio(1, 3), ratio(1, 1), ratio(5, 2)).unwrap();
        assert!(is_one(&(ex.red + ex.black)));
    }

    #[test]
    fn single_leaf_probabilities() {
        let leaf = PlaneTree::leaf(1.0, None);
        let red = ColoredShape::from_leaf_colors(&leaf, &[Color::Red]).unwrap();
        let black = ColoredShape::from_leaf_colors(&leaf, &[Color::Black]).unwrap();
        let p = colored_tree_prob(&red, ratio(0, 1), ratio(1, 1), ratio(2, 1)).unwrap();
        assert_eq!(p.composite, ratio(3, 8));
        assert_eq!(p.colored, ratio(3, 8));
        let p = colored_tree_prob(&black, ratio(0, 1), ratio(1, 1), ratio(2, 1)).unwrap();
        assert_eq!(p.composite, ratio(1, 8));
        assert_eq!(p.colored, ratio(1, 8));
    }

    #[test]
    fn routes_agree_exactly_in_rationals() {
        let params = [
            (ratio(0, 1), ratio(1, 1), ratio(2, 1)),
            (ratio(1, 1), ratio(2, 1), ratio(4, 1)),
            (ratio(2, 7), ratio(5, 3), ratio(11, 4)),
        ];
        for shape in enumerate_colored_shapes(5).unwrap() {
            for (l, m, t) in &params {
                let p = colored_tree_prob(&shape, l.clone(), m.clone(), t.clone()).unwrap();
                assert_eq!(p.composite, p.colored, "{}", shape.key());
                let c = colored_prob_by_counts(
                    shape.leaves(),
                    shape.black_leaves(),
                    l.clone(),
                    m.clone(),
                    t.clone(),
                )
                .unwrap();
                assert_eq!(c, p.composite, "{}", shape.key());
            }
        }
    }

    #[test]
    fn colourings_sum_to_shape_prob() {
        for n in 1..=5 {
            for shape in enumerate_shapes(n) {
                let total: f64 = (0u32..1 << n)
                    .map(|mask| {
                        let colors: Vec<Color> = (0..n)
                            .map(|j| {
                                if mask >> j & 1 == 1 {
                                    Color::Black
                                } else {
                                    Color::Red
                                }
                            })
                            .collect();
                        let s = ColoredShape::from_leaf_colors(&shape, &colors).unwrap();
                        colored_tree_prob(&s, 0.5, 1.25, 3.0).unwrap().composite
                    })
                    .sum();
                assert!(close(total, shape_prob(n, 0.5, 3.0), 1e-12));
            }
        }
    }

    #[test]
    fn total_mass_grows_to_one() {
        let masses: Vec<f64> = (1..=6)
            .map(|m| {
                enumerate_colored_shapes(m)
                    .unwrap()
                    .iter()
                    .map(|s| colored_tree_prob(s, 0.0, 1.0, 2.0).unwrap().composite)
                    .sum()
            })
            .collect();
        assert!(masses.windows(2).all(|w| w[0] < w[1]));
        assert!(masses[5] < 1.0);
        let tail = 1.0 - leaf_count_cdf(6, 0.5).unwrap();
        assert!(close(masses[5] + tail, 1.0, 1e-12));
    }

    #[test]
    fn shape_counts() {
        assert_eq!(shape_count(1).unwrap(), 1);
        assert_eq!(shape_count(3).unwrap(), 2);
        assert_eq!(shape_count(4).unwrap(), 5);
        assert!(shape_count(0).is_err());
        for n in 1..=8 {
            assert_eq!(enumerate_shapes(n).len() as u128, shape_count(n).unwrap());
        }
        assert_eq!(shape_count(9).unwrap(), 1430);
    }

    #[test]
    fn leaf_pmf_values() {
        assert_eq!(leaf_count_pmf(1, 0.3).unwrap(), 0.7);
        assert!(close(leaf_count_pmf(3, 0.5).unwrap(), 1.0 / 16.0, 1e-15));
        // the tail beyond 200 leaves still carries about 7.3e-7 at p = 0.4
        let s: f64 = (1..=200).map(|n| leaf_count_pmf(n, 0.4).unwrap()).sum();
        assert!((s - (1.0 - 7.2817e-7)).abs() < 1e-10, "{s}");
        let s: f64 = (1..=2000).map(|n| leaf_count_pmf(n, 0.4).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9);
        // exact and log-space branches meet smoothly
        let a = leaf_count_pmf(60, 0.45).unwrap();
        let b = (ln_shape_count(60) + 59.0 * 0.45f64.ln() + 60.0 * 0.55f64.ln()).exp();
        assert!(close(a, b, 1e-12));
        assert!(leaf_count_pmf(2, 0.6).is_err());
        assert!(leaf_count_pmf(0, 0.3).is_err());
    }

    #[test]
    fn rate_values() {
        let r = rates(1.0, 3.0, 5.0).unwrap();
        assert_eq!((r.r, r.r_prime), (2.0, 4.0));
        assert!(close(r.nu_inf_mass, 1.0 / 3.0, 1e-15));
        assert_eq!(rates(0.0, 1.0, 2.0).unwrap().nu_inf_mass, 0.0);
        assert_eq!(r.r + r.r_prime, 6.0);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_colored_shapes(1).unwrap().len(), 2);
        assert_eq!(enumerate_colored_shapes(2).unwrap().len(), 6);
        assert_eq!(enumerate_colored_shapes(3).unwrap().len(), 22);
        assert!(enumerate_colored_shapes(9).is_err());
        let keys: std::collections::HashSet<String> = enumerate_colored_shapes(4)
            .unwrap()
            .iter()
            .map(ColoredShape::key)
            .collect();
        assert_eq!(keys.len(), 2 + 4 + 16 + 80);
    }

    #[test]
    fn from_tree_rejects_non_spanning_colours() {
        let r = Some(Color::Red);
        let b = Some(Color::Black);
        let good = PlaneTree::join(1.0, b, PlaneTree::leaf(1.0, r), PlaneTree::leaf(1.0, b));
        assert!(ColoredShape::from_tree(&good).is_ok());
        let bad = PlaneTree::join(1.0, b, PlaneTree::leaf(1.0, r), PlaneTree::leaf(1.0, r));
        assert!(ColoredShape::from_tree(&bad).is_err());
    }
}
