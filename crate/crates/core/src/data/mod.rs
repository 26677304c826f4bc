//! Measurement ingestion, synthetic data generation and the sample file
//! format.

pub mod merl;
pub mod sampleset;
pub mod synth;

pub use merl::{merl_lookup, read_merl, write_merl, MerlTable};
pub use sampleset::{read_sampleset, write_sampleset, Sample, SampleSet, Source};
pub use synth::{
    gen_corrupted_ggx, gen_fixed_view_ggx, gen_synthetic_ggx, merl_to_sampleset, planted_materials,
    sample_directions, Corruption, Noise, SamplingMode,
};
