//! Fidelity, fidelity-gap and parity metrics, significance testing, and
//! protected-group information probes.

pub mod auroc;
pub mod fidelity;
pub mod parity;
pub mod probe;
pub mod wilcoxon;

pub use auroc::auroc;
pub use fidelity::{
    fidelity, gap_report, group_fidelities, max_gap_from_average, mean_pairwise_gap, threshold,
    FidelityMetric, FidelityPairs, GapReport, PairwiseGap,
};
pub use parity::{demographic_parity_gap, preservation_check, preservation_check_one_vs_rest, ParityGap, PreservationCheck};
pub use probe::{group_probe, mi_filter, mi_report, mutual_information, MiFilterReport, ProbeReport};
pub use wilcoxon::{wilcoxon_one_sided, WilcoxonResult};
