//! Symmetric quadrature rules on triangles in barycentric form.
//! Weights sum to one; multiply by the element area.

use crate::linalg::Point;

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Three interior points, exact for quadratics.
pub fn order2() -> [QuadPoint; 3] {
    let a = 2.0 / 3.0;
    let b = 1.0 / 6.0;
    let w = 1.0 / 3.0;
    [
        QuadPoint {
            bary: [a, b, b],
            weight: w,
        },
        QuadPoint {
            bary: [b, a, b],
            weight: w,
        },
        QuadPoint {
            bary: [b, b, a],
            weight: w,
        },
    ]
}

/// Seven-point rule exact for quintics.
pub fn order5() -> [QuadPoint; 7] {
    let s15 = 15f64.sqrt();
    let b1 = (6.0 + s15) / 21.0;
    let a1 = 1.0 - 2.0 * b1;
    let w1 = (155.0 + s15) / 1200.0;
    let b2 = (6.0 - s15) / 21.0;
    let a2 = 1.0 - 2.0 * b2;
    let w2 = (155.0 - s15) / 1200.0;
    [
        QuadPoint {
            bary: [1.0 / 3.0; 3],
            weight: 0.225,
        },
        QuadPoint {
            bary: [a1, b1, b1],
            weight: w1,
        },
        QuadPoint {
            bary: [b1, a1, b1],
            weight: w1,
        },
        QuadPoint {
            bary: [b1, b1, a1],
            weight: w1,
        },
        QuadPoint {
            bary: [a2, b2, b2],
            weight: w2,
        },
        QuadPoint {
            bary: [b2, a2, b2],
            weight: w2,
        },
        QuadPoint {
            bary: [b2, b2, a2],
            weight: w2,
        },
    ]
}

pub fn map_point(corners: &[Point; 3], bary: &[f64; 3]) -> Point {
    Point::from(corners[0].coords * bary[0] + corners[1].coords * bary[1] + corners[2].coords * bary[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    // exact integral of l0^a l1^b l2^c over a unit-area triangle: 2 a! b! c! / (a+b+c+2)!
    fn exact(a: u32, b: u32, c: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        2.0 * f(a) * f(b) * f(c) / f(a + b + c + 2)
    }

    fn check(rule: &[QuadPoint], degree: u32) {
        for a in 0..=degree {
            for b in 0..=degree - a {
                for c in 0..=degree - a - b {
                    let q: f64 = rule
                        .iter()
                        .map(|p| {
                            p.weight * p.bary[0].powi(a as i32) * p.bary[1].powi(b as i32) * p.bary[2].powi(c as i32)
                        })
                        .sum();
                    assert!((q - exact(a, b, c)).abs() < 1e-14, "monomial {a} {b} {c}");
                }
            }
        }
    }

    #[test]
    fn rules_reach_their_degree() {
        check(&order2(), 2);
        check(&order5(), 5);
    }
}
