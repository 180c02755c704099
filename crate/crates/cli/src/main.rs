fn main() {
    // placeholder while the core crate comes up; replaced by the real CLI
    eprintln!("not yet implemented");
    std::process::exit(1);
}
