//! Toy kinematics: a decoupled linear map between the six joints and the
//! Cartesian pose. X, Y, Z are ten millimetres per degree of A1, A2, A3;
//! the orientation angles equal A4, A5, A6.

pub type Vec6 = [f64; 6];

const SCALE: Vec6 = [10.0, 10.0, 10.0, 1.0, 1.0, 1.0];

pub fn forward(joints: &Vec6) -> Vec6 {
    std::array::from_fn(|i| joints[i] * SCALE[i])
}

pub fn inverse(pose: &Vec6) -> Vec6 {
    std::array::from_fn(|i| pose[i] / SCALE[i])
}

pub fn sub(a: &Vec6, b: &Vec6) -> Vec6 {
    std::array::from_fn(|i| a[i] - b[i])
}

pub fn norm(a: &Vec6) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &Vec6, b: &Vec6) -> f64 {
    norm(&sub(a, b))
}

/// Cartesian distance between two joint configurations, with degrees of
/// orientation counted like millimetres.
pub fn pose_dist(a: &Vec6, b: &Vec6) -> f64 {
    dist(&forward(a), &forward(b))
}

pub fn lerp(a: &Vec6, b: &Vec6, s: f64) -> Vec6 {
    std::array::from_fn(|i| a[i] + (b[i] - a[i]) * s)
}

/// Quadratic Bezier through `p0`, control point `c`, ending at `p2`.
pub fn bezier(p0: &Vec6, c: &Vec6, p2: &Vec6, s: f64) -> Vec6 {
    let u = 1.0 - s;
    std::array::from_fn(|i| u * u * p0[i] + 2.0 * s * u * c[i] + s * s * p2[i])
}

pub fn is_finite(v: &Vec6) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_inverse_round_trip() {
        let q = [0.0, -90.0, 90.0, 0.0, 0.0, 0.0];
        assert_eq!(forward(&q), [0.0, -900.0, 900.0, 0.0, 0.0, 0.0]);
        assert_eq!(inverse(&forward(&q)), q);
    }

    #[test]
    fn bezier_endpoints() {
        let p0 = [1.0; 6];
        let c = [2.0; 6];
        let p2 = [3.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(bezier(&p0, &c, &p2, 0.0), p0);
        assert_eq!(bezier(&p0, &c, &p2, 1.0), p2);
    }
}
