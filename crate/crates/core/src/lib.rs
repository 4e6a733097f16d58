//! Pseudo-Hermitian optical parametric amplifier: PT-region classification,
//! metric construction and the Hermitian partner, Ermakov-Pinney and
//! Lewis-Riesenfeld invariant solvers, invariant eigenstates with their phases,
//! and the Wigner distribution of a two-lobe cat state.

pub mod numerics;
pub mod signals;
pub mod metric;
pub mod ep;
pub mod invariant;
pub mod states;
pub mod wigner;

use thiserror::Error;

/// Union of the per-module errors.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Signal(#[from] signals::SignalError),
    #[error(transparent)]
    Metric(#[from] metric::MetricError),
    #[error(transparent)]
    Ep(#[from] ep::EpError),
    #[error(transparent)]
    Invariant(#[from] invariant::InvariantError),
    #[error(transparent)]
    States(#[from] states::StatesError),
    #[error(transparent)]
    Wigner(#[from] wigner::WignerError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input: bad arguments, tables or constants.
    Argument,
    /// Valid input outside the region where the model is defined: broken PT,
    /// singular coefficients, non-normalizable states.
    Domain,
    /// A numerical routine missed its tolerance.
    Accuracy,
}

fn numerics_kind(e: &numerics::NumericsError) -> ErrorKind {
    use numerics::NumericsError as N;
    match e {
        N::InvalidArgument(_) => ErrorKind::Argument,
        N::Bracket { .. } | N::Singularity { .. } => ErrorKind::Domain,
        N::Convergence { .. } | N::Accuracy { .. } | N::NonFinite { .. } => ErrorKind::Accuracy,
    }
}

fn signal_kind(e: &signals::SignalError) -> ErrorKind {
    use signals::SignalError as S;
    match e {
        S::InvalidTable(_) | S::InvalidArgument(_) => ErrorKind::Argument,
        _ => ErrorKind::Domain,
    }
}

fn ep_kind(e: &ep::EpError) -> ErrorKind {
    use ep::EpError as E;
    match e {
        E::InvalidConstant { .. } | E::InvalidArgument(_) => ErrorKind::Argument,
        E::Numerics(n) => numerics_kind(n),
        _ => ErrorKind::Domain,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use metric::MetricError as M;
        use states::StatesError as St;
        use wigner::WignerError as W;
        match self {
            Error::Numerics(e) => numerics_kind(e),
            Error::Signal(e) => signal_kind(e),
            Error::Metric(M::Signal(e)) => signal_kind(e),
            Error::Metric(M::Numerics(e)) => numerics_kind(e),
            Error::Metric(M::HermitizationFailure { .. }) => ErrorKind::Accuracy,
            Error::Metric(M::ZeroKappa) => ErrorKind::Argument,
            Error::Metric(_) => ErrorKind::Domain,
            Error::Ep(e) => ep_kind(e),
            Error::Invariant(_) => ErrorKind::Domain,
            Error::States(St::InvalidArgument(_)) => ErrorKind::Argument,
            Error::States(St::Ep(e)) => ep_kind(e),
            Error::States(St::Numerics(e)) => numerics_kind(e),
            Error::States(_) => ErrorKind::Domain,
            Error::Wigner(W::InvalidGrid(_)) => ErrorKind::Argument,
            Error::Wigner(W::Numerics(e)) => numerics_kind(e),
            Error::Wigner(W::NonNormalizable { .. }) => ErrorKind::Domain,
        }
    }
}
