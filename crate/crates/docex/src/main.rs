fn main() {
    std::process::exit(docex::cli::main());
}
