pub mod completion;
pub mod expr;
pub mod iterint;
pub mod jet;
pub mod leznov;
pub mod liedata;
pub mod minors;
pub mod pairing;
pub mod sampling;
pub mod tau;
