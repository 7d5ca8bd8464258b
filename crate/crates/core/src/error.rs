use thiserror::Error;

use crate::coeffs::CoeffError;
use crate::config::ConfigError;
use crate::construct::ConstructError;
use crate::family::FamilyError;
use crate::grid::GridError;
use crate::io::IoError;
use crate::params::ParamsError;
use crate::profile::ProfileError;
use crate::verify::VerifyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Construct(#[from] ConstructError),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExitCode {
    Pass = 0,
    ResidualFailure = 1,
    Domain = 2,
    Config = 3,
}

impl ExitCode {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl Error {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Error::Config(_) | Error::Params(_) | Error::Grid(_) | Error::Io(_) => ExitCode::Config,
            Error::Verify(_) => ExitCode::Config,
            Error::Construct(ConstructError::Params(_)) => ExitCode::Config,
            Error::Profile(ProfileError::Params(_)) => ExitCode::Config,
            Error::Coeff(CoeffError::InvalidIndex(_) | CoeffError::OrderBudget { .. }) => ExitCode::Config,
            Error::Coeff(_) | Error::Profile(_) | Error::Construct(_) | Error::Family(_) => ExitCode::Domain,
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Params(_) => "params",
            Error::Grid(_) => "grid",
            Error::Coeff(_) => "coefficient",
            Error::Profile(_) => "profile",
            Error::Construct(_) => "construct",
            Error::Family(_) => "family",
            Error::Verify(_) => "verify",
            Error::Io(_) => "io",
        }
    }
}
