//! Resolution-optimal next-best-view search and supervised example generation.

use rayon::prelude::*;

use crate::grid::{OccupancyGrid, SensorModel, VoxelState, DEFAULT_EDGE};
use crate::metrics::{
    count_features, covered_mask, integrate_perception, overlap_region_indexed, MetricConfig, SpatialIndex,
};
use crate::scene::camera::render_with_bvh;
use crate::scene::{depth_to_cloud, sample_surface, CameraModel, MeshBvh, PointCloud, TriangleMesh, View, ViewSet};
use crate::{Error, Result};

/// Parameters shared by dataset generation and closed-loop reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionConfig {
    /// Stop once coverage reaches this fraction.
    pub s_cov: f64,
    pub max_iter: usize,
    /// Episodes stop when one step gains less coverage than this.
    pub plateau_eps: f64,
    pub metric: MetricConfig,
    pub sensor: SensorModel,
    pub grid_edge: usize,
    pub camera: CameraModel,
    /// Lattice spacing of the ground-truth surface sampling.
    pub surface_spacing: f64,
    /// Initial views per object, strided over the search space.
    pub initial_views: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            s_cov: 0.8,
            max_iter: 10,
            plateau_eps: 0.002,
            metric: MetricConfig::default(),
            sensor: SensorModel::default(),
            grid_edge: DEFAULT_EDGE,
            camera: CameraModel::default(),
            surface_spacing: 0.004,
            initial_views: 14,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_cov >= 0.0 && self.s_cov <= 1.0) {
            return Err(Error::invalid(format!("s_cov must be in [0,1], got {}", self.s_cov)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        if !(self.plateau_eps >= 0.0) {
            return Err(Error::invalid("plateau_eps must be >= 0"));
        }
        if self.grid_edge == 0 || self.grid_edge > u16::MAX as usize {
            return Err(Error::invalid(format!("grid edge {} out of range", self.grid_edge)));
        }
        if !(self.surface_spacing > 0.0) {
            return Err(Error::invalid("surface spacing must be > 0"));
        }
        self.metric.validate()?;
        self.sensor.validate()?;
        self.camera.validate()
    }
}

/// The search space with one precomputed global-frame perception per view.
#[derive(Debug, Clone)]
pub struct PerceptionSet {
    views: ViewSet,
    clouds: Vec<PointCloud>,
}

impl PerceptionSet {
    pub fn new(views: ViewSet, clouds: Vec<PointCloud>) -> Result<PerceptionSet> {
        if views.len() != clouds.len() {
            return Err(Error::invalid(format!("{} views but {} perceptions", views.len(), clouds.len())));
        }
        Ok(PerceptionSet { views, clouds })
    }

    /// Renders every view of `views` against `mesh`.
    pub fn render(mesh: &TriangleMesh, views: ViewSet, camera: &CameraModel) -> Result<PerceptionSet> {
        if mesh.triangles().is_empty() {
            return Err(Error::invalid("cannot render a mesh with zero triangles"));
        }
        camera.validate()?;
        let bvh = MeshBvh::build(mesh);
        let clouds = views.views().par_iter().map(|v| depth_to_cloud(&render_with_bvh(&bvh, v, camera))).collect();
        Ok(PerceptionSet { views, clouds })
    }

    pub fn views(&self) -> &ViewSet {
        &self.views
    }

    pub fn cloud(&self, id: usize) -> &PointCloud {
        &self.clouds[id]
    }

    pub fn len(&self) -> usize {
        self.clouds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clouds.is_empty()
    }
}

/// Ordered view ids already used as sensor poses.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitedSet {
    ids: Vec<usize>,
}

impl VisitedSet {
    pub fn new() -> VisitedSet {
        VisitedSet::default()
    }

    /// Returns false if `id` was already present.
    pub fn insert(&mut self, id: usize) -> bool {
        if self.ids.contains(&id) {
            return false;
        }
        self.ids.push(id);
        true
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Audit row for one candidate view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub view_id: usize,
    pub overlap: f64,
    pub features: usize,
    pub delta: f64,
    pub visited: bool,
    pub collision: bool,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// `None` when no candidate satisfies the constraints.
    pub nbv: Option<View>,
    pub delta: f64,
    pub per_candidate: Vec<Candidate>,
}

impl OracleResult {
    pub fn feasible(&self) -> bool {
        self.nbv.is_some()
    }
}

/// Exhaustive constrained search over `perceptions`.
///
/// No view is excluded as visited and no collision grid is consulted; see
/// [`Scenario::next_best_view`] for the form used inside reconstruction runs.
pub fn resolution_optimal_nbv(
    p_acu: &PointCloud,
    w_obj: &PointCloud,
    perceptions: &PerceptionSet,
    cfg: &MetricConfig,
) -> Result<OracleResult> {
    if w_obj.is_empty() {
        return Err(Error::invalid("oracle needs a nonempty ground-truth cloud"));
    }
    let masks = view_masks(perceptions, w_obj, cfg.gap);
    search(p_acu, w_obj, perceptions, &masks, cfg, &VisitedSet::new(), None)
}

fn view_masks(perceptions: &PerceptionSet, w_obj: &PointCloud, gap: f64) -> Vec<Vec<bool>> {
    perceptions
        .clouds
        .par_iter()
        .map(
            |z| {
                if z.is_empty() {
                    vec![false; w_obj.len()]
                } else {
                    covered_mask(&SpatialIndex::build(z), w_obj, gap)
                }
            },
        )
        .collect()
}

fn search(
    p_acu: &PointCloud,
    w_obj: &PointCloud,
    perceptions: &PerceptionSet,
    masks: &[Vec<bool>],
    cfg: &MetricConfig,
    visited: &VisitedSet,
    grid: Option<&OccupancyGrid>,
) -> Result<OracleResult> {
    if perceptions.is_empty() {
        return Err(Error::invalid("oracle needs a nonempty perception set"));
    }
    if p_acu.is_empty() {
        return Err(Error::invalid("oracle needs at least one integrated perception"));
    }
    cfg.validate()?;
    let acu_index = SpatialIndex::build(p_acu);
    let base = covered_mask(&acu_index, w_obj, cfg.gap);
    let n = w_obj.len() as f64;
    let base_count = base.iter().filter(|&&b| b).count();

    let per_candidate: Vec<Candidate> = perceptions
        .views
        .views()
        .par_iter()
        .map(|view| {
            let z = &perceptions.clouds[view.id];
            let (overlap, features) = if z.is_empty() {
                (0.0, 0)
            } else {
                let region = overlap_region_indexed(z, &acu_index, cfg.gap);
                let ov = region.len() as f64 / z.len() as f64;
                (ov, count_features(&region, cfg.feature_radius, cfg.curvature_tau))
            };
            let union_count = base.iter().zip(&masks[view.id]).filter(|(&a, &b)| a || b).count();
            let delta = union_count as f64 / n - base_count as f64 / n;
            let collision = grid.is_some_and(|g| g.state_at(&view.position) == VoxelState::Occupied);
            let was_visited = visited.contains(view.id);
            Candidate {
                view_id: view.id,
                overlap,
                features,
                delta,
                visited: was_visited,
                collision,
                feasible: overlap > cfg.min_overlap && features > cfg.min_features && !collision && !was_visited,
            }
        })
        .collect();

    let mut best: Option<&Candidate> = None;
    for c in per_candidate.iter().filter(|c| c.feasible) {
        if best.is_none_or(|b| c.delta > b.delta) {
            best = Some(c);
        }
    }
    Ok(OracleResult {
        nbv: best.map(|c| perceptions.views.views()[c.view_id]),
        delta: best.map_or(0.0, |c| c.delta),
        per_candidate,
    })
}

/// Nearest class view by great-circle distance between directions, lowest id on ties.
pub fn view_to_class(v: &View, class_set: &ViewSet) -> Result<usize> {
    if class_set.is_empty() {
        return Err(Error::invalid("class set is empty"));
    }
    let d = v.direction();
    let mut best = (f64::INFINITY, 0);
    for c in class_set.iter() {
        let angle = d.dot(&c.direction()).clamp(-1.0, 1.0).acos();
        if angle < best.0 {
            best = (angle, c.id);
        }
    }
    Ok(best.1)
}

/// Everything the oracle and the reconstruction loop need about one object.
#[derive(Debug, Clone)]
pub struct Scenario {
    w_obj: PointCloud,
    perceptions: PerceptionSet,
    masks: Vec<Vec<bool>>,
    grid: OccupancyGrid,
    cfg: ReconstructionConfig,
}

impl Scenario {
    pub fn build(mesh: &TriangleMesh, search_space: ViewSet, cfg: &ReconstructionConfig) -> Result<Scenario> {
        cfg.validate()?;
        let perceptions = PerceptionSet::render(mesh, search_space, &cfg.camera)?;
        let w_obj = sample_surface(mesh, cfg.surface_spacing)?;
        Scenario::from_parts(w_obj, perceptions, mesh.half_extent(), cfg)
    }

    /// Assembles a scenario from precomputed clouds; the grid encloses a cube
    /// of half-edge `half_extent`.
    pub fn from_parts(
        w_obj: PointCloud,
        perceptions: PerceptionSet,
        half_extent: f64,
        cfg: &ReconstructionConfig,
    ) -> Result<Scenario> {
        cfg.validate()?;
        if w_obj.is_empty() {
            return Err(Error::invalid("ground-truth cloud is empty"));
        }
        let grid = OccupancyGrid::enclosing(half_extent, cfg.grid_edge, cfg.sensor)?;
        if let Some(p) = w_obj.iter().find(|p| grid.voxel_of(p).is_none()) {
            return Err(Error::invalid(format!("ground-truth point {p:?} lies outside the grid")));
        }
        let masks = view_masks(&perceptions, &w_obj, cfg.metric.gap);
        Ok(Scenario { w_obj, perceptions, masks, grid, cfg: *cfg })
    }

    pub fn w_obj(&self) -> &PointCloud {
        &self.w_obj
    }

    pub fn perceptions(&self) -> &PerceptionSet {
        &self.perceptions
    }

    pub fn views(&self) -> &ViewSet {
        &self.perceptions.views
    }

    pub fn config(&self) -> &ReconstructionConfig {
        &self.cfg
    }

    /// A grid with every voxel unknown, placed around the object.
    pub fn fresh_grid(&self) -> OccupancyGrid {
        self.grid.clone()
    }

    /// Coverage of the ground truth by the union of single perceptions.
    pub fn view_coverage(&self, id: usize) -> f64 {
        let m = &self.masks[id];
        m.iter().filter(|&&b| b).count() as f64 / m.len() as f64
    }

    pub fn coverage(&self, p_acu: &PointCloud) -> f64 {
        if p_acu.is_empty() {
            return 0.0;
        }
        let mask = covered_mask(&SpatialIndex::build(p_acu), &self.w_obj, self.cfg.metric.gap);
        mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
    }

    /// Oracle restricted to unvisited, collision-free views.
    pub fn next_best_view(
        &self,
        p_acu: &PointCloud,
        visited: &VisitedSet,
        grid: Option<&OccupancyGrid>,
    ) -> Result<OracleResult> {
        search(p_acu, &self.w_obj, &self.perceptions, &self.masks, &self.cfg.metric, visited, grid)
    }

    /// Integrates the perception of `view_id` into `p_acu` and `grid`.
    pub fn perceive(&self, view_id: usize, p_acu: &mut PointCloud, grid: &mut OccupancyGrid) -> Result<()> {
        let view = self
            .views()
            .get(view_id)
            .ok_or_else(|| Error::invalid(format!("view {view_id} not in the search space")))?;
        let z = self.perceptions.cloud(view_id);
        *p_acu = integrate_perception(p_acu, z, self.cfg.metric.leaf)?;
        grid.update(z, &view.position);
        Ok(())
    }
}

/// One supervised sample: the grid seen by the network and the class of the
/// view the oracle chose next.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub object_id: u32,
    pub run_id: u32,
    pub iteration: u16,
    pub label: u8,
    pub edge: usize,
    /// Occupancy probabilities, x-major.
    pub grid: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunEnd {
    CoverageReached,
    MaxIterations,
    Infeasible,
}

impl RunEnd {
    pub fn name(self) -> &'static str {
        match self {
            RunEnd::CoverageReached => "coverage_reached",
            RunEnd::MaxIterations => "max_iterations",
            RunEnd::Infeasible => "infeasible",
        }
    }
}

/// Trace of one dataset-generation run.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRun {
    pub initial_view: usize,
    /// Sensor poses in the order they were integrated.
    pub views: Vec<usize>,
    /// Coverage after each integration.
    pub coverage: Vec<f64>,
    pub results: Vec<OracleResult>,
    pub examples: Vec<Example>,
    pub end: RunEnd,
}

/// Runs the generation loop from every initial view, in parallel, keeping
/// output in initial-view order.
pub fn generate_runs(
    scenario: &Scenario,
    class_set: &ViewSet,
    object_id: u32,
    initial_views: &[usize],
) -> Result<Vec<GenerationRun>> {
    if class_set.len() > 256 {
        return Err(Error::invalid("at most 256 classes fit a u8 label"));
    }
    initial_views.par_iter().map(|&v| generation_run(scenario, class_set, object_id, v)).collect()
}

/// Flattened examples of [`generate_runs`].
pub fn generate_examples(
    scenario: &Scenario,
    class_set: &ViewSet,
    object_id: u32,
    initial_views: &[usize],
) -> Result<Vec<Example>> {
    Ok(generate_runs(scenario, class_set, object_id, initial_views)?.into_iter().flat_map(|r| r.examples).collect())
}

fn generation_run(scenario: &Scenario, class_set: &ViewSet, object_id: u32, initial: usize) -> Result<GenerationRun> {
    let cfg = scenario.config();
    if scenario.views().get(initial).is_none() {
        return Err(Error::invalid(format!("initial view {initial} not in the search space")));
    }
    let mut p_acu = PointCloud::empty();
    let mut grid = scenario.fresh_grid();
    let mut visited = VisitedSet::new();
    let mut run = GenerationRun {
        initial_view: initial,
        views: Vec::new(),
        coverage: Vec::new(),
        results: Vec::new(),
        examples: Vec::new(),
        end: RunEnd::MaxIterations,
    };
    let mut next = initial;
    let mut cov = 0.0;
    let mut iter = 0;
    loop {
        if cov >= cfg.s_cov {
            run.end = RunEnd::CoverageReached;
            break;
        }
        if iter >= cfg.max_iter {
            break;
        }
        scenario.perceive(next, &mut p_acu, &mut grid)?;
        visited.insert(next);
        run.views.push(next);
        cov = scenario.coverage(&p_acu);
        run.coverage.push(cov);

        let result = scenario.next_best_view(&p_acu, &visited, Some(&grid))?;
        let Some(nbv) = result.nbv else {
            run.results.push(result);
            run.end = RunEnd::Infeasible;
            break;
        };
        run.examples.push(Example {
            object_id,
            run_id: initial as u32,
            iteration: iter as u16,
            label: view_to_class(&nbv, class_set)? as u8,
            edge: grid.dims()[0],
            grid: grid.snapshot(),
        });
        run.results.push(result);
        next = nbv.id;
        iter += 1;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scene::{generate_view_sphere, Point, ViewSetKind};

    /// Three orthogonal planar patches meeting at `corner`, spacing `step`.
    fn corner_patch(corner: Point, step: f64, n: usize) -> Vec<Point> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (i as f64 * step, j as f64 * step);
                pts.push(corner + nalgebra::Vector3::new(a, b, 0.0));
                if i > 0 {
                    pts.push(corner + nalgebra::Vector3::new(a, 0.0, b));
                }
                if i > 0 && j > 0 {
                    pts.push(corner + nalgebra::Vector3::new(0.0, a, b));
                }
            }
        }
        pts
    }

    fn cloud(points: Vec<Point>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    fn two_views() -> ViewSet {
        ViewSet::new(
            vec![
                View::looking_at_origin(0, Point::new(0.0, 0.0, 0.4)),
                View::looking_at_origin(1, Point::new(0.4, 0.0, 0.0)),
            ],
            0.4,
            ViewSetKind::SearchSpace,
        )
        .unwrap()
    }

    #[test]
    fn constraint_beats_raw_gain() {
        // Known surface: a corner patch (already in P_acu) and a far strip.
        let step = 0.0023;
        let known = corner_patch(Point::new(0.0, 0.0, 0.0), step, 20);
        let far: Vec<Point> =
            (0..400).map(|i| Point::new(0.2 + (i % 20) as f64 * step, 0.2 + (i / 20) as f64 * step, 0.0)).collect();
        let mut w = known.clone();
        w.extend(far.iter().copied());
        let w_obj = cloud(w);
        let p_acu = cloud(known.clone());

        // A: mostly the unseen strip with a sliver of the corner (low overlap, big gain).
        let mut a: Vec<Point> = far.clone();
        a.extend(known.iter().take(40).copied());
        // B: the whole corner plus a small part of the strip.
        let mut b = known.clone();
        b.extend(far.iter().take(60).copied());
        let set = PerceptionSet::new(two_views(), vec![cloud(a.clone()), cloud(b.clone())]).unwrap();

        let cfg = MetricConfig::default();
        let res = resolution_optimal_nbv(&p_acu, &w_obj, &set, &cfg).unwrap();
        let (ca, cb) = (res.per_candidate[0], res.per_candidate[1]);
        assert!(ca.overlap < 0.5 && ca.delta > cb.delta, "{ca:?}");
        assert!(cb.overlap > 0.5 && cb.features >= 3, "{cb:?}");
        assert_eq!(res.nbv.unwrap().id, 1);
        assert_eq!(res.delta, cb.delta);
    }

    #[test]
    fn saturated_model_picks_lowest_feasible_id() {
        let known = corner_patch(Point::new(0.0, 0.0, 0.0), 0.0023, 20);
        let w_obj = cloud(known.clone());
        let set = PerceptionSet::new(two_views(), vec![w_obj.clone(), w_obj.clone()]).unwrap();
        let res = resolution_optimal_nbv(&w_obj, &w_obj, &set, &MetricConfig::default()).unwrap();
        assert!(res.per_candidate.iter().all(|c| c.delta == 0.0));
        assert_eq!(res.nbv.unwrap().id, 0);
        assert_eq!(res.delta, 0.0);
    }

    #[test]
    fn infeasible_without_features() {
        let plane: Vec<Point> =
            (0..400).map(|i| Point::new((i % 20) as f64 * 0.002, (i / 20) as f64 * 0.002, 0.0)).collect();
        let w_obj = cloud(plane);
        let set = PerceptionSet::new(two_views(), vec![w_obj.clone(), w_obj.clone()]).unwrap();
        let res = resolution_optimal_nbv(&w_obj, &w_obj, &set, &MetricConfig::default()).unwrap();
        assert!(!res.feasible());
        assert!(res.per_candidate.iter().all(|c| c.features == 0));
    }

    #[test]
    fn oracle_rejects_empty_inputs() {
        let w = cloud(vec![Point::origin()]);
        let set = PerceptionSet::new(two_views(), vec![w.clone(), w.clone()]).unwrap();
        let cfg = MetricConfig::default();
        assert!(resolution_optimal_nbv(&PointCloud::empty(), &w, &set, &cfg).is_err());
        assert!(resolution_optimal_nbv(&w, &PointCloud::empty(), &set, &cfg).is_err());
        assert!(PerceptionSet::new(two_views(), vec![w]).is_err());
    }

    #[test]
    fn class_mapping_matches_linear_scan() {
        let classes = generate_view_sphere(14, 0.4, true).unwrap();
        for c in classes.iter() {
            assert_eq!(view_to_class(c, &classes).unwrap(), c.id);
        }
        let poles = ViewSet::new(
            vec![
                View::looking_at_origin(0, Point::new(0.0, 0.0, 1.0)),
                View::looking_at_origin(1, Point::new(0.0, 0.0, -1.0)),
            ],
            1.0,
            ViewSetKind::ClassSet,
        )
        .unwrap();
        let south = View::looking_at_origin(7, Point::new(1e-3, 0.0, -1.0));
        assert_eq!(view_to_class(&south, &poles).unwrap(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let rot = Rotation3::from_euler_angles(
                rng.random_range(-3.2..3.2),
                rng.random_range(-3.2..3.2),
                rng.random_range(-3.2..3.2),
            );
            let v = View::looking_at_origin(0, rot * Point::new(0.0, 0.0, 0.4));
            let mut expect = 0;
            let mut best = f64::INFINITY;
            for c in classes.iter() {
                let cos = v.position.coords.normalize().dot(&c.position.coords.normalize());
                let ang = cos.clamp(-1.0, 1.0).acos();
                if ang < best {
                    best = ang;
                    expect = c.id;
                }
            }
            assert_eq!(view_to_class(&v, &classes).unwrap(), expect);
        }
    }

    #[test]
    fn visited_set_rejects_duplicates() {
        let mut s = VisitedSet::new();
        assert!(s.insert(3));
        assert!(s.insert(1));
        assert!(!s.insert(3));
        assert_eq!(s.ids(), &[3, 1]);
    }
}
