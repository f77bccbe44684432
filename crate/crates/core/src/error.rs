use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point cloud with no points.
    EmptyCloud,
    /// A coordinate or parameter that is NaN or infinite.
    NonFinite(&'static str),
    /// All points coincide, so a scale cannot be defined.
    DegenerateCloud,
    /// Every triangle of the mesh has zero area.
    DegenerateMesh,
    /// Face `face` references vertex `index` but the mesh only has `count` vertices.
    FaceIndexOutOfRange { face: usize, index: usize, count: usize },
    /// Face `face` repeats a vertex index.
    DegenerateFace { face: usize },
    /// Two inputs that must agree in size do not.
    SizeMismatch { what: &'static str, expected: usize, found: usize },
    /// An argument is outside its admissible range.
    InvalidArgument(String),
    /// An assignment is not a bijection between the two clouds.
    InvalidAssignment(String),
    /// The exhaustive EMD oracle only accepts small inputs.
    TooLarge { n: usize, max: usize },
    /// A batch has no positive pair, or a positive pair has no negatives.
    DegenerateBatch(String),
    /// Embeddings were computed with different encoder parameters.
    StaleEmbeddings,
    /// The template database is empty.
    EmptyDatabase,
    /// The optimizer produced a NaN or infinite loss at `iteration`.
    NonFiniteLoss { iteration: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => write!(f, "point cloud is empty"),
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Error::DegenerateCloud => write!(f, "degenerate point cloud: all points coincide"),
            Error::DegenerateMesh => write!(f, "degenerate mesh: total surface area is zero"),
            Error::FaceIndexOutOfRange { face, index, count } => write!(
                f,
                "face {face} references vertex {index} but the mesh has {count} vertices"
            ),
            Error::DegenerateFace { face } => write!(f, "face {face} repeats a vertex index"),
            Error::SizeMismatch { what, expected, found } => {
                write!(f, "size mismatch in {what}: expected {expected}, found {found}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidAssignment(msg) => write!(f, "invalid assignment: {msg}"),
            Error::TooLarge { n, max } => write!(f, "input of size {n} exceeds the limit of {max}"),
            Error::DegenerateBatch(msg) => write!(f, "degenerate batch: {msg}"),
            Error::StaleEmbeddings => {
                write!(f, "database embeddings were computed with different encoder parameters")
            }
            Error::EmptyDatabase => write!(f, "template database is empty"),
            Error::NonFiniteLoss { iteration } => {
                write!(f, "loss became non-finite at iteration {iteration}")
            }
        }
    }
}

impl core::error::Error for Error {}
