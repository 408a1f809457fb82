//! Delay-Doppler link simulation and predictive precoding.
//!
//! * [`autodiff`]: reverse-mode differentiation tape used to train through the
//!   analytic frame-error-rate expression.
//! * [`channel`]: path generation, frame-to-frame evolution, and construction
//!   of the time-domain and delay-Doppler channel matrices.
//! * [`modem`]: (I)SFFT, DD/time vector transforms, noisy channel application,
//!   Gray-labelled square QAM.
//! * [`link`]: ZF/MMSE equalizers, SINR/SER/FER closed forms, Monte Carlo
//!   frame-error measurement.
//! * [`net`]: the conv-LSTM precoder network, its unsupervised trainer, the
//!   perfect-CSI CNN baseline, and checkpoints.

pub mod autodiff;
pub mod channel;
pub mod linalg;
pub mod link;
pub mod modem;
pub mod net;
pub mod rng;

pub use linalg::CMatrix;
pub use num_complex::Complex64;
