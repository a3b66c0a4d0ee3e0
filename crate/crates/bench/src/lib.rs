//! Shared setup for the benchmarks.

use std::path::PathBuf;
use std::sync::Arc;

use fracdg::{Example, LdgContext, Mesh, ReferenceElement};

/// A mesh from the repository's `meshes/` directory.
pub fn load_mesh(name: &str) -> Mesh {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../meshes").join(name);
    Mesh::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Operator context for one of the manufactured examples at `alpha = beta`.
pub fn context(mesh: &str, degree: usize, alpha: f64, example: Example) -> LdgContext {
    let reference = Arc::new(ReferenceElement::new(degree).expect("supported degree"));
    LdgContext::new(Arc::new(load_mesh(mesh)), reference, alpha, alpha, example.default_coefficients())
        .expect("assembly succeeds")
}
