//! Maximal-coordinate rigid-body dynamics for mechanisms with kinematic loops,
//! joint limits and frictional contact.
//!
//! Every body carries its own pose and twist; joints of any topology become
//! constraint rows. Each step solves the dual problem for the constraint
//! impulses with a proximal ADMM iteration on the Delassus operator, using
//! either a dense factorization or a matrix-free Conjugate Residual solve.
//! Independent worlds of different mechanisms can be stepped together as a
//! batch.
//!
//! ```
//! use loopdyn::{bundled_model, step, StepConfig, WorldState};
//!
//! let model = bundled_model("fourbar").unwrap();
//! let mut state = WorldState::new(&model);
//! let report = step(&model, &mut state, &StepConfig::default()).unwrap();
//! assert!(report.diagnostics.converged);
//! ```

pub mod batch;
pub mod contacts;
pub mod delassus;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod model;
pub mod padmm;
pub mod scene;
pub mod se3;
pub mod stepper;

pub use batch::{batch_step, WorldBatch};
pub use delassus::BackendChoice;
pub use error::{KinematicsError, ModelError, SceneError, SolverError};
pub use kinematics::{fk_solve, FkConfig, FkProblem, FkResult, JointTarget};
pub use model::{joint_coordinate, BodyRef, JointKind, MechanismModel};
pub use padmm::{PadmmConfig, PadmmDiagnostics};
pub use scene::{build_model, bundled_model, bundled_scene, SceneDescription, BUNDLED_SCENES};
pub use se3::{Pose, Twist};
pub use stepper::{step, total_energy, Integrator, StepConfig, StepReport, WorldAux, WorldState};
