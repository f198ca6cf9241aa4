#![allow(dead_code)]

pub mod gradient_oracle;
