fn main() {
    println!("vortexray");
}
