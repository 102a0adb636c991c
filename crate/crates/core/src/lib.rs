pub mod baselines;
pub mod geom;
pub mod gridmap;
pub mod harness;
pub mod keypoints;
pub mod optimizer;
pub mod oracle;
pub mod projection;
pub mod pnm;
pub mod raster;
pub mod rng;
pub mod scalar;
pub mod scene;
pub mod trace;

pub type Point = geom::Vec2<f64>;
pub type Pose = geom::Pose2D<f64>;
pub type Grid = gridmap::OccupancyGrid<f64>;
pub type Config = optimizer::PlannerConfig<f64>;
