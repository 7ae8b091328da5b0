//! Dataset recipes and builds: per-group parameter sampling, group
//! assignment, model-level splits and the on-disk manifest.

mod build;
mod manifest;
mod params;

pub use build::{
    build_dataset, colored_albedo, discover_models, entry_seed, sha256_hex, BuildConfig, BuildSummary, FsStore, MemoryStore, MeshRenderer, ModelSource,
    PairRenderer, PairStore,
};
pub use manifest::{entry_path, DatasetManifest, FailedModel, GroupRecord, ManifestEntry, ParamsSnapshot, MANIFEST_FILE, SCHEMA_VERSION};
pub use params::{assign_groups, param_value, sample_group_params, split_train_test, train_count, Param, ParamRanges, Range, Recipe, RecipeId, Split};
