//! Pipeline stages over in-memory values, with per-object parallelism.
//!
//! Results are collected in input order and the first failure in that order
//! is reported, so outputs and errors do not depend on the thread count.

use acdc_core::affordance::{articulation_trajectory, detect_handle, AffordanceError, HandleEstimate, HandleParams, LinkMesh, Skill, Trajectory};
use acdc_core::bundle::{AssetDatabase, ExtractionBundle, JointSpec, Provenance, SceneDescription};
use acdc_core::matching::{select_cousins, CousinMatch, MatchConfig, MatchError};
use acdc_core::metrics::{evaluate, MetricsError, MetricsReport, SymmetryTable};
use acdc_core::scenegen::{
    assemble_scene, object_cloud, randomize_scene, scene_frame, CompileConfig, CompiledScene, PostConfig,
    RandomizationSpec, Randomized, SceneError,
};
use acdc_core::Vec3;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage match: object {object}: {source}")]
    Match {
        object: String,
        #[source]
        source: MatchError,
    },
    #[error("stage {stage}: {source}")]
    Scene {
        stage: &'static str,
        #[source]
        source: SceneError,
    },
    #[error("stage eval: {0}")]
    Metrics(#[from] MetricsError),
    #[error("stage traj: asset {asset} link {link}: {source}")]
    Affordance {
        asset: String,
        link: String,
        #[source]
        source: AffordanceError,
    },
}

fn scene_err(stage: &'static str) -> impl Fn(SceneError) -> PipelineError {
    move |source| PipelineError::Scene { stage, source }
}

/// Pool capped at `threads` workers; zero uses every core.
pub fn thread_pool(threads: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

fn first_error<T, E>(results: Vec<Result<T, E>>) -> Result<Vec<T>, E> {
    results.into_iter().collect()
}

/// What `match` writes: the matches plus the inputs they depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchFile {
    pub bundle_hash: String,
    pub config: MatchConfig,
    pub matches: Vec<CousinMatch>,
}

pub fn match_bundle(
    bundle: &ExtractionBundle,
    db: &AssetDatabase,
    cfg: &MatchConfig,
    pool: &ThreadPool,
) -> Result<Vec<CousinMatch>, PipelineError> {
    let results: Vec<_> = pool.install(|| {
        bundle
            .objects
            .par_iter()
            .map(|o| {
                select_cousins(o, db, cfg, bundle.sidecar.as_ref()).map_err(|source| PipelineError::Match {
                    object: o.id.clone(),
                    source,
                })
            })
            .collect()
    });
    first_error(results)
}

pub fn generate_scene(
    bundle: &ExtractionBundle,
    matches: &[CousinMatch],
    db: &AssetDatabase,
    cfg: &CompileConfig,
    provenance: Provenance,
    pool: &ThreadPool,
) -> Result<CompiledScene, PipelineError> {
    let frame = scene_frame(bundle, cfg).map_err(scene_err("scene_frame"))?;
    let results: Vec<_> = pool.install(|| {
        (0..bundle.objects.len())
            .into_par_iter()
            .map(|i| object_cloud(bundle, &frame, i, cfg).map_err(scene_err("object_cloud")))
            .collect()
    });
    let clouds = first_error(results)?;
    assemble_scene(bundle, &frame, clouds, matches, db, cfg, provenance).map_err(scene_err("generate"))
}

pub fn randomize(
    scene: &SceneDescription,
    spec: &RandomizationSpec,
    matches: &[CousinMatch],
    db: &AssetDatabase,
    post: &PostConfig,
) -> Result<Randomized, PipelineError> {
    randomize_scene(scene, spec, matches, db, post).map_err(scene_err("randomize"))
}

pub fn eval_scenes(
    gt: &SceneDescription,
    rec: &SceneDescription,
    db: &AssetDatabase,
    symmetry: &SymmetryTable,
) -> Result<MetricsReport, PipelineError> {
    Ok(evaluate(gt, rec, db, symmetry)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub asset: String,
    pub link: String,
    pub skill: Skill,
    pub joint: JointSpec,
    pub handle: HandleEstimate,
    pub trajectory: Trajectory,
}

pub fn link_trajectory(
    asset: &str,
    mesh: &LinkMesh,
    front_axis: Vec3,
    skill: Skill,
    waypoints: usize,
    params: &HandleParams,
) -> Result<TrajectoryFile, PipelineError> {
    let err = |source| PipelineError::Affordance {
        asset: asset.into(),
        link: mesh.link.clone(),
        source,
    };
    mesh.check().map_err(err)?;
    let handle = detect_handle(mesh, front_axis, params).map_err(err)?;
    let trajectory = articulation_trajectory(handle.location, &mesh.joint, skill, waypoints).map_err(err)?;
    Ok(TrajectoryFile {
        asset: asset.into(),
        link: mesh.link.clone(),
        skill,
        joint: mesh.joint,
        handle,
        trajectory,
    })
}
