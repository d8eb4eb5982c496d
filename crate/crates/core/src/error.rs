use alloc::string::String;

/// Errors raised by the kernel, the element routines, assembly and the solver.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not an se(3) element: {0}")]
    MalformedAlgebraElement(String),
    #[error("rotation angle {angle} rad is within the branch-cut margin of pi")]
    NearBranchCut { angle: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("relative rotation of {angle} rad across the element is too large; refine the mesh")]
    ElementTooCoarse { angle: f64 },
    #[error("strain slope too large: Magnus operator condition number {condition:e}")]
    SlopeTooLarge { condition: f64 },
    #[error("rest geometry too coarse: relative rest rotation of {angle} rad across the element")]
    RestGeometryTooCoarse { angle: f64 },
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("element {element}: {source}")]
    Element {
        element: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("non-finite value in the assembled system ({0})")]
    NonFinite(String),
    #[error("prescribed motion of node {node} crosses the branch cut; subdivide the target")]
    PrescribedBranchCut { node: usize },
    #[error("singular tangent: pivot {pivot:e} at global dof {dof}")]
    Singular { dof: usize, pivot: f64 },
    #[error("line search stalled at residual {residual:e} after {halvings} halvings")]
    LineSearchStall { residual: f64, halvings: usize },
    #[error("no convergence within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("oracle failed: {0}")]
    Oracle(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub(crate) fn at_element(self, element: usize) -> Self {
        Error::Element {
            element,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
