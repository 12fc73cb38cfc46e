//! Fixed quadrature rules used by assembly and error norms.
//!
//! 1D integrals use 4-point Gauss-Legendre per element (exact to degree 7),
//! triangle integrals the symmetric 7-point rule (exact to degree 5). Both
//! are comfortably beyond what the P1 integrands require, so quadrature
//! error never competes with the discretisation error being measured.

/// 4-point Gauss-Legendre nodes on [-1, 1].
pub const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];

/// Weights matching [`GL4_NODES`]; they sum to 2.
pub const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_86,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_86,
];

/// Map the 4-point rule onto the interval [a, b].
/// Returns (nodes, weights); weights sum to b - a.
pub fn gl4_on_interval(a: f64, b: f64) -> ([f64; 4], [f64; 4]) {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut nodes = [0.0; 4];
    let mut weights = [0.0; 4];
    for k in 0..4 {
        nodes[k] = mid + half * GL4_NODES[k];
        weights[k] = half * GL4_WEIGHTS[k];
    }
    (nodes, weights)
}

/// Symmetric 7-point triangle rule, exact to degree 5.
/// Barycentric coordinates with weights normalised to sum to 1; multiply by
/// the triangle area when integrating.
pub const TRI7: [([f64; 3], f64); 7] = {
    // Interior point groups: centroid, and two three-point orbits.
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const W1: f64 = 0.132_394_152_788_506_18;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_34;
    const W2: f64 = 0.125_939_180_544_827_15;
    const WC: f64 = 0.225;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], WC),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};
