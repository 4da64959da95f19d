fn main() {
    std::process::exit(splsm::cli::main_entry());
}
