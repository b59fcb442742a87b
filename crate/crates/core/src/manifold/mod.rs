//! Riemannian geometry of the response spaces and the vectorizations that
//! turn manifold points into regression targets.

mod spd;
mod sphere;
mod vech;

pub use spd::{
    chol_map, chol_map_inverse, cholesky_factor, dist_log_cholesky, dist_log_euclidean,
    frechet_mean_log_cholesky, frechet_mean_log_euclidean, from_log_cholesky, group_op, spd_exp,
    spd_log, LowerTriMatrix, SpdMatrix, SymMatrix, EIGENVALUE_FLOOR, SYMMETRY_TOL,
};
pub use sphere::{
    frechet_mean_sphere, sphere_dist, sphere_exp, sphere_log, tangent_frame, SpherePoint,
};
pub use vech::{tri_index, tri_len, tri_side, unvecl, unvecs, vecl, vecs, TangentVector};
