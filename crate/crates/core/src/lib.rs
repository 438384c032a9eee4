pub mod cli;
pub mod correlator;
pub mod fitting;
pub mod io;
pub mod physics;
pub mod sim;
pub mod units;
