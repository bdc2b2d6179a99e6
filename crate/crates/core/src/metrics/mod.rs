//! Classification metrics, ROC analysis, the inverse normal CDF and the
//! repetition-accuracy simulator.

mod classification;
mod normal;
mod roc;
mod simulate;

pub use classification::{confusion, prf1, ConfusionMatrix, Prf1, Undefined};
pub use normal::{d_prime, norm_cdf, norm_pdf, norminv};
pub use roc::{roc_auc, RocCurve};
pub use simulate::{analytic_char_accuracy, simulate_char_accuracy, SimulationRow, N_CANDIDATES};
