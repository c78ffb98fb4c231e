fn main() {
    std::process::exit(cgmy_atm::cli::run());
}
