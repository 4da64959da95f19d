pub mod basis;
pub mod cli;
pub mod inference;
pub mod linalg;
pub mod mesh;
pub mod quad;
pub mod select;
pub mod sim;
pub mod smoother;
pub mod space;
