//! Write, read and average adapters in the FLAT container, including a
//! 4-bit tensor.
//!
//! `cargo run -p finalign --example adapter_container`

use finalign::federation::aggregate;
use finalign::trainer::{load_adapter, save_adapter, toy_adapter, LoraShape, Tensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let shape = LoraShape {
        hidden: 8,
        rank: 2,
        ..LoraShape::default()
    };
    let mut a = toy_adapter(&shape, 1);
    let mut b = toy_adapter(&shape, 2);
    a.insert("scales.u4", Tensor::from_u4(vec![4], &[0, 3, 8, 15])?);
    b.insert("scales.u4", Tensor::from_u4(vec![4], &[1, 3, 9, 15])?);
    println!("{} tensors, {} params, {} payload bytes", a.len(), a.param_count(), a.payload_bytes());
    for (name, t) in a.iter() {
        println!("  {name:<24} {:?} {:?}", t.dtype(), t.shape());
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("a.flat");
    save_adapter(&a, &path)?;
    let bytes = std::fs::read(&path)?;
    assert_eq!(load_adapter(&path)?, a);
    println!("\n{} bytes on disk, magic {:?}", bytes.len(), String::from_utf8_lossy(&bytes[..8]));

    let mean = aggregate(&[a.clone(), b.clone()])?;
    println!("u4 mean of [0,3,8,15] and [1,3,9,15]: {:?}", mean.get("scales.u4").unwrap().to_u4());
    let name = a.names().find(|n| !n.ends_with("u4")).unwrap().to_string();
    let (x, y, m) = (a.get(&name).unwrap().to_f32(), b.get(&name).unwrap().to_f32(), mean.get(&name).unwrap().to_f32());
    println!("{name}[0]: ({} + {}) / 2 = {}", x[0], y[0], m[0]);
    Ok(())
}
