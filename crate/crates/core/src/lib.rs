pub mod ame;
pub mod cli;
pub mod dyad;
pub mod error;
pub mod eval;
pub mod glmbase;
pub mod gof;
pub mod lfm;
pub mod linalg;
pub mod lsm;
pub mod netdata;
pub mod randkit;
pub mod simstudy;
pub mod srm;
pub mod summary;
