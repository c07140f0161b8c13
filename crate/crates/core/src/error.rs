use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("response function has a pole at x = {0}")]
    Pole(f64),
    #[error("root-finding failure: {0}")]
    RootFinding(String),
    #[error("field is singular on the contour near ({x}, {y})")]
    SingularOnContour { x: f64, y: f64 },
    #[error("ambiguous winding: raw index {0}")]
    AmbiguousWinding(f64),
    #[error("degenerate chart equation: {0}")]
    DegenerateChart(String),
    #[error("unclassifiable infinite singularity: {0}")]
    Unclassifiable(String),
    #[error("step-size underflow at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("no return to section: {0}")]
    NoReturn(String),
    #[error("section is not transversal at s = {0}")]
    NotTransversal(f64),
    #[error("not a saddle: {0}")]
    NotASaddle(String),
    #[error("inconsistent stability: return map derivative {derivative}, divergence estimate {divergence}")]
    InconsistentStability { derivative: f64, divergence: f64 },
    #[error("no merge in range: {0}")]
    NoMerge(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario assertion failed: {0}")]
    Assertion(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
