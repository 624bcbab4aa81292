#![allow(dead_code)]

pub mod logit;
pub mod resample;
