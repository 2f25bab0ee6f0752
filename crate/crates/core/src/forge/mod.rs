//! Instance generators and instance files.

pub mod graph;
pub mod hjb;
pub mod io;
pub mod manipulator;
pub mod random;
pub mod rng;
pub mod speed;

pub use graph::{gen_graph, GraphFamily, GraphParams, RandomGraph};
pub use hjb::{hjb_grid_problem, hjb_residual, GridAxis, HjbGridSpec};
pub use io::{load_instance, save_instance};
pub use manipulator::{manipulator_problem, ManipulatorCoefficients};
pub use random::{family_instance, random_linear_problem, RandomScales};
pub use speed::{maneuver_time, speed_planning_problem, SpeedPlanSpec};
