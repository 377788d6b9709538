#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "claimcheck/error.hpp"
#include "claimcheck/pipeline.hpp"

namespace {

struct LeafOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
};

using Command = void (*)(const claimcheck::RunConfig&, bool);

void attach(CLI::App* leaf, LeafOptions& opts, Command command) {
  leaf->add_option("--config", opts.config, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  leaf->add_option("--seed", opts.seed, "override the config seed");
  leaf->add_flag("--force", opts.force, "overwrite existing artifacts");
  leaf->callback([&opts, command]() {
    try {
      claimcheck::RunConfig cfg = claimcheck::load_config(opts.config, opts.seed);
      command(cfg, opts.force);
    } catch (const claimcheck::Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      std::exit(1);
    } catch (const std::exception& e) {
      std::cerr << "error: Internal: " << e.what() << "\n";
      std::exit(1);
    }
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retrieval-augmented claim verification pipeline"};
  app.require_subcommand(1);

  auto* index = app.add_subcommand("index", "sparse retrieval index");
  index->require_subcommand(1);
  LeafOptions index_build_opts;
  attach(index->add_subcommand("build", "build the inverted index artifact"),
         index_build_opts, claimcheck::cmd_index_build);

  auto* rerank = app.add_subcommand("rerank", "dense re-ranker");
  rerank->require_subcommand(1);
  LeafOptions rerank_train_opts;
  attach(rerank->add_subcommand("train", "train the re-ranking adapter"),
         rerank_train_opts, claimcheck::cmd_rerank_train);

  auto* eval = app.add_subcommand("eval", "evaluation");
  eval->require_subcommand(1);
  LeafOptions eval_retrieval_opts;
  attach(eval->add_subcommand("retrieval", "score retrieval on claims with gold documents"),
         eval_retrieval_opts, claimcheck::cmd_eval_retrieval);

  auto* demos = app.add_subcommand("demos", "demonstration store");
  demos->require_subcommand(1);
  LeafOptions demos_prepare_opts;
  attach(demos->add_subcommand("prepare", "cache arguments for the train split (resumable)"),
         demos_prepare_opts, claimcheck::cmd_demos_prepare);

  auto* verify = app.add_subcommand("verify", "claim verification");
  verify->require_subcommand(1);
  LeafOptions verify_run_opts;
  attach(verify->add_subcommand("run", "classify and explain the test split"),
         verify_run_opts, claimcheck::cmd_verify_run);

  CLI11_PARSE(app, argc, argv);
  return 0;
}
