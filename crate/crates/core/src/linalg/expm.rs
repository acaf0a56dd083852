//! Matrix exponential by scaling-and-squaring with a degree-13 Padé
//! approximant (Higham 2005). Always uses the degree-13 form; at the sizes
//! involved here the extra multiplies are irrelevant.

use crate::linalg::lu::Lu;
use crate::linalg::mat::Mat;

const THETA_13: f64 = 5.371920351148152;

const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade13(a: &Mat) -> Mat {
    let n = a.rows();
    let eye = Mat::identity(n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &(&(&a6.scale(B[13]) + &a4.scale(B[11])) + &a2.scale(B[9])) * &a6;
    let u_poly = &(&(&u_inner + &a6.scale(B[7])) + &a4.scale(B[5]))
        + &(&a2.scale(B[3]) + &eye.scale(B[1]));
    let u = a * &u_poly;

    let v_inner = &(&(&a6.scale(B[12]) + &a4.scale(B[10])) + &a2.scale(B[8])) * &a6;
    let v = &(&(&v_inner + &a6.scale(B[6])) + &a4.scale(B[4]))
        + &(&a2.scale(B[2]) + &eye.scale(B[0]));

    // (V - U) X = (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    Lu::factor(&lhs)
        .expect("Padé denominator is nonsingular for a scaled matrix")
        .solve_mat(&rhs)
}

/// e^{A·t}.
pub fn matrix_exponential(a: &Mat, t: f64) -> Mat {
    assert!(a.is_square(), "matrix exponential requires a square matrix");
    assert!(t.is_finite(), "time must be finite");
    let n = a.rows();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let b = a.scale(t);
    let norm = b.norm_one();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = b.scale(0.5f64.powi(s as i32));
    let mut e = pade13(&scaled);
    for _ in 0..s {
        e = &e * &e;
    }
    e
}
