//! Advantage actor-critic comparison agent for the image-addition task:
//! fixed-length episodes of digit images, one digit guess per step, terminal
//! reward from the summed absolute error.

pub mod a2c;
pub mod agent;
pub mod compare;

pub use a2c::{run_episode, train_agent, A2cConfig, A2cRunLog, Trajectory};
pub use agent::AgentNet;
pub use compare::{compare_learning_efficiency, EfficiencyReport, LearningCurve};
