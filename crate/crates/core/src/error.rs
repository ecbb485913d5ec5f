use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid array geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid user location: {0}")]
    InvalidLocation(String),

    #[error("element offset ({m_y}, {m_z}) is not on the {my}x{mz} array grid")]
    IndexOutOfRange { m_y: f64, m_z: f64, my: usize, mz: usize },

    #[error("point lies behind the array plane (x = {x})")]
    OutsideFrontHalfSpace { x: f64 },

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("near-singular Hermitian system (condition estimate {condition:.3e})")]
    NearSingular { condition: f64 },

    #[error("interferer channels are collinear (Gram condition estimate {condition:.3e})")]
    CollinearInterferers { condition: f64 },

    #[error("zero-forcing infeasible for user {user}: its channel lies in the interferer span")]
    ZeroForcingInfeasible { user: usize },

    #[error("beamformer must be unit-norm, got norm {norm}")]
    NonUnitBeamformer { norm: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl Error {
    /// True for errors caused by the numerical content of a scenario rather
    /// than by malformed input parameters.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_)
                | Error::DegenerateChannel(_)
                | Error::NearSingular { .. }
                | Error::CollinearInterferers { .. }
                | Error::ZeroForcingInfeasible { .. }
                | Error::NonUnitBeamformer { .. }
        )
    }
}
