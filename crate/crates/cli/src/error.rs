use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input; exit code 2.
    #[error("{0}")]
    Input(String),
}

macro_rules! input_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Input(e.to_string())
            }
        }
    )*};
}

input_from!(
    novlab_core::GroupoidError,
    novlab_core::RingError,
    novlab_core::ComplexError,
    novlab_core::SlideError,
    novlab_core::ModelError,
    novlab_core::HolonomyError
);
