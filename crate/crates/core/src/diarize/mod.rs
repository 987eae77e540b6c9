//! Silence segmentation, affinity, speaker counting, spectral clustering and
//! the session pipeline that ties them to the decoder.

pub mod affinity;
pub mod kmeans;
pub mod nme;
pub mod pipeline;
pub mod spectral;
pub mod vad;

pub use affinity::{build_affinity, AffinityMatrix};
pub use nme::{count_speakers_nme, nme_search, NmeCandidate, NmeOutcome};
pub use pipeline::{
    cluster_recognized, count_speakers, diarize_session, recognize_segments, segment_features, speaker_transcripts, timed_speech, transcribe_with_profiles,
    AttributedUtterance, Counting, Diarization, DiarizeConfig, Embedding, SegmentRecognition,
};
pub use spectral::{spectral_cluster, spectral_embedding, ClusterResult};
pub use vad::{cut_segments, segment_silence, FrameSpan, Segment, VadConfig};
