fn main() {
    std::process::exit(fluxkit::cli::main());
}
