pub mod adversary;
pub mod authcode;
pub mod cost;
pub mod filedist;
pub mod gf;
pub mod goodput;
pub mod linalg;
pub mod netcode;
pub mod poly;
pub mod topologies;
