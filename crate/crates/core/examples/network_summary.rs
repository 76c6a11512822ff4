//! Lists every layer of the hiding and reveal networks with its parameter
//! count.
//!
//! ```text
//! cargo run --example network_summary
//! ```

use stegnet::net::StegoModel;

fn main() -> stegnet::Result<()> {
    let model = StegoModel::<f32>::new(3, 0.01)?;
    let mut layer = String::new();
    let mut count = 0;
    let mut rows = Vec::new();
    for (name, t) in model.params.iter() {
        let base = name.rsplit_once('.').map_or(name, |(l, _)| l).to_string();
        if base != layer && !layer.is_empty() {
            rows.push((std::mem::take(&mut layer), count));
            count = 0;
        }
        layer = base;
        count += t.len();
    }
    rows.push((layer, count));
    for (name, n) in &rows {
        println!("{name:<32} {n:>8}");
    }
    println!("{:<32} {:>8}", "encoder total", model.encoder_param_count());
    println!("{:<32} {:>8}", "decoder total", model.decoder_param_count());
    println!("{:<32} {:>8}", "total", model.params.total_count());
    Ok(())
}
