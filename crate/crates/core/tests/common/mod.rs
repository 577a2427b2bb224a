// Each test target uses a different subset of these helpers.
#![allow(dead_code)]

pub mod fuzz;
pub mod noise_golden;
