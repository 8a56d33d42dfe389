use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("eigenvalue feasibility condition violated: {0}")]
    FeasibilityViolated(String),
    #[error("no sign-definite principal eigenvector found")]
    NoSignDefiniteEigenvector,
    #[error("Rayleigh quotient denominator is not positive ({0:e})")]
    DenominatorNotPositive(f64),
    #[error("Newton iteration diverged at lambda = {lambda} (residual {residual:e})")]
    NewtonDiverged { lambda: f64, residual: f64 },
    #[error("converged steady state is not positive at lambda = {lambda}")]
    NegativeSolution { lambda: f64 },
    #[error("continuation produced no admissible branch points")]
    EmptyBranch,
    #[error("bordered linear system is singular")]
    SingularBorderedSystem,
    #[error("indeterminate: {0}")]
    Indeterminate(String),
    #[error("no sign change of the balance function on the bracket")]
    NoSignChange,
    #[error("solvability condition violated (defect {0:e})")]
    SolvabilityViolated(f64),
    #[error("transversality value xi* vanishes ({0:e})")]
    A2Violated(f64),
    #[error("pairing <l, T_uu[1, psi*]> does not vanish ({0:e})")]
    PreconditionViolated(f64),
    #[error("branch amplitude is zero")]
    AmplitudeZero,
    #[error("outside the admissible regime: {0}")]
    OutOfRegime(String),
    #[error("eigenvalue tracking lost a branch at sigma = {sigma}")]
    NewtonLostEigenvalue { sigma: f64 },
    #[error("unstable count jumped by {jump} at sigma = {sigma}")]
    CountJumpNotTwo { sigma: f64, jump: i64 },
    #[error("time step became unstable at t = {t}")]
    StepUnstable { t: f64 },
    #[error("history buffer cannot serve time {t}")]
    HistoryUnderrun { t: f64 },
}

/// Coarse error classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Solver,
    Regime,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Validation(_) => ErrorClass::Validation,
            FeasibilityViolated(_)
            | DenominatorNotPositive(_)
            | NegativeSolution { .. }
            | EmptyBranch
            | NoSignChange
            | SolvabilityViolated(_)
            | A2Violated(_)
            | PreconditionViolated(_)
            | AmplitudeZero
            | OutOfRegime(_) => ErrorClass::Regime,
            _ => ErrorClass::Solver,
        }
    }

    pub fn code(&self) -> &'static str {
        use Error::*;
        match self {
            Validation(_) => "Validation",
            FeasibilityViolated(_) => "FeasibilityViolated",
            NoSignDefiniteEigenvector => "NoSignDefiniteEigenvector",
            DenominatorNotPositive(_) => "DenominatorNotPositive",
            NewtonDiverged { .. } => "NewtonDiverged",
            NegativeSolution { .. } => "NegativeSolution",
            EmptyBranch => "EmptyBranch",
            SingularBorderedSystem => "SingularBorderedSystem",
            Indeterminate(_) => "Indeterminate",
            NoSignChange => "NoSignChange",
            SolvabilityViolated(_) => "SolvabilityViolated",
            A2Violated(_) => "A2Violated",
            PreconditionViolated(_) => "PreconditionViolated",
            AmplitudeZero => "AmplitudeZero",
            OutOfRegime(_) => "OutOfRegime",
            NewtonLostEigenvalue { .. } => "NewtonLostEigenvalue",
            CountJumpNotTwo { .. } => "CountJumpNotTwo",
            StepUnstable { .. } => "StepUnstable",
            HistoryUnderrun { .. } => "HistoryUnderrun",
        }
    }
}
