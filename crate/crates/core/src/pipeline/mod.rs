//! Experiment orchestration: scene loading, the split protocol, training and
//! evaluation runs, detection maps, synthetic scenes and the latency bench.

mod bench;
mod experiment;
mod render;
mod split;
mod synth;
mod tools;

pub use bench::{
    bench_inference, random_cube, random_mlp, run_bench, BenchConfig, BenchReport, MIN_REPETITIONS,
    REFERENCE_CUBE,
};
pub use experiment::{
    load_scene, run_eval, run_render, run_train, scene_mean_report, score_report, EvalOutcome,
    ExperimentConfig, LoadedScene, MapSpec, Modality, RenderConfig, SceneEvaluation, TrainOutcome,
};
pub use render::{render_map, render_ppm, Color, RenderPalette};
pub use split::{split_dataset, split_indices, SplitIndices};
pub use synth::{
    background_library, generate_scene, material_library, render_rgb, riverine_scenes, synth_gen,
    AbsorptionDip, Background, BaseSpectrum, Material, SceneSpec, SynthConfig, SyntheticScene,
    RGB_AVERAGED_BANDS,
};
pub use tools::{
    run_calibrate, run_register, CalibrateConfig, CalibrationSummary, RegisterConfig,
    RegistrationSummary,
};
