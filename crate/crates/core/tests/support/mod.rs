#![allow(dead_code)]

pub mod reeval;
