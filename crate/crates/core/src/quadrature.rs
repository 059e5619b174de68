//! Quadrature rules on the reference triangle (barycentric points, weights
//! summing to one) and on segments.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriangleRule {
    /// 3-point Gauss rule, exact for degree 2.
    #[default]
    Gauss3,
    /// 7-point Radon rule, exact for degree 5.
    Radon7,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub bary: [f64; 3],
    pub weight: f64,
}

impl TriangleRule {
    pub fn nodes(self) -> Vec<QuadNode> {
        match self {
            TriangleRule::Gauss3 => {
                let (a, b) = (2.0 / 3.0, 1.0 / 6.0);
                [[a, b, b], [b, a, b], [b, b, a]]
                    .into_iter()
                    .map(|bary| QuadNode { bary, weight: 1.0 / 3.0 })
                    .collect()
            }
            TriangleRule::Radon7 => {
                let r15 = 15f64.sqrt();
                let a = (6.0 - r15) / 21.0;
                let b = (6.0 + r15) / 21.0;
                let wa = (155.0 - r15) / 1200.0;
                let wb = (155.0 + r15) / 1200.0;
                let mut nodes = vec![QuadNode { bary: [1.0 / 3.0; 3], weight: 9.0 / 40.0 }];
                for (p, w) in [(a, wa), (b, wb)] {
                    let q = 1.0 - 2.0 * p;
                    for bary in [[q, p, p], [p, q, p], [p, p, q]] {
                        nodes.push(QuadNode { bary, weight: w });
                    }
                }
                nodes
            }
        }
    }
}

/// Two-point Gauss–Legendre rule on `[0, 1]`: `(parameter, weight)`.
pub fn gauss2_segment() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

#[cfg(test)]
mod tests {
    use super::*;

    // Exact integral of x^p y^q over the unit right triangle: p! q! / (p + q + 2)!
    fn monomial_exact(p: u32, q: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(p) * fact(q) / fact(p + q + 2)
    }

    fn check_degree(rule: TriangleRule, degree: u32) {
        let nodes = rule.nodes();
        assert!((nodes.iter().map(|n| n.weight).sum::<f64>() - 1.0).abs() < 1e-15);
        for p in 0..=degree {
            for q in 0..=(degree - p) {
                let approx: f64 = nodes
                    .iter()
                    .map(|n| 0.5 * n.weight * n.bary[1].powi(p as i32) * n.bary[2].powi(q as i32))
                    .sum();
                assert!((approx - monomial_exact(p, q)).abs() < 1e-15, "{rule:?} x^{p} y^{q}");
            }
        }
    }

    #[test]
    fn rules_are_exact_to_their_degree() {
        check_degree(TriangleRule::Gauss3, 2);
        check_degree(TriangleRule::Radon7, 5);
    }

    #[test]
    fn gauss2_integrates_cubics() {
        let s: f64 = gauss2_segment().iter().map(|(t, w)| w * t.powi(3)).sum();
        assert!((s - 0.25).abs() < 1e-15);
    }
}
