//! Scoring: cpWER, DER, speaker counting error and time boundaries.

pub mod assignment;
pub mod boundaries;
pub mod der;
pub mod wer;

pub use assignment::min_cost_assignment;
pub use boundaries::{estimate_boundaries, mean_speaker_count_error, speaker_count_error, weighted_frame_index};
pub use der::{der, der_exact, DerReport, TimedSpeech};
pub use wer::{cpwer, cpwer_brute_force, edit_distance, words, CpWerReport, EditCounts, SpeakerTranscripts};
