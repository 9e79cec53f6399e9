fn main() {
    std::process::exit(normlearn::cli::main_entry());
}
