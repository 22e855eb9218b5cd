fn main() {
    std::process::exit(seqpred::cli::run());
}
