#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hemera/error.hpp"
#include "hemera/pipeline.hpp"

namespace {

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool quiet = false;
  bool print_config = false;
};

hemera::RunConfig resolve(const Options& opt) {
  nlohmann::json j = nlohmann::json::object();
  if (!opt.config_path.empty()) {
    if (!std::filesystem::exists(opt.config_path))
      throw hemera::Error(hemera::ErrorCode::ConfigInvalid, "config file " + opt.config_path + " does not exist");
    std::ifstream in(opt.config_path);
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw hemera::Error(hemera::ErrorCode::ConfigInvalid, opt.config_path + ": " + e.what());
    }
  }
  for (const auto& o : opt.overrides) hemera::apply_override(j, o);
  if (!opt.output_dir.empty()) hemera::apply_override(j, "paths.output_dir=\"" + opt.output_dir + "\"");
  if (opt.quiet) hemera::apply_override(j, "verbose=false");
  return hemera::run_config_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hemera: genotype transformer pipeline"};
  app.require_subcommand(1);
  Options opt;

  const char* help[] = {
      "write a synthetic cohort (needs a synth section)",
      "MAF filter and tokenize the cohort",
      "split the data and run masked-token pretraining",
      "fine-tune the pretrained encoder and evaluate on the test split",
      "k-fold cross-validation with per-fold attribution",
      "integrated-gradient attributions on the test split",
      "top-k tables, Manhattan data and known-locus matches",
      "sweep depth, heads and MAF threshold",
      "generate (when configured), preprocess, pretrain, finetune, attribute, report",
  };
  const auto& names = hemera::subcommands();
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("-c,--config", opt.config_path, "JSON config file");
    sub->add_option("-s,--set", opt.overrides, "override a config key, e.g. model.n_layers=2")->take_all();
    sub->add_option("-o,--out", opt.output_dir, "output directory (paths.output_dir)");
    sub->add_flag("-q,--quiet", opt.quiet, "suppress progress messages");
    sub->add_flag("--print-config", opt.print_config, "print the resolved config and exit");
  }

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    hemera::configure_threads();
    const auto config = resolve(opt);
    if (opt.print_config) {
      std::cout << hemera::to_json(config).dump(2) << '\n';
      return 0;
    }
    std::error_code ec;
    std::filesystem::create_directories(config.paths.output_dir, ec);
    if (ec)
      throw hemera::Error(hemera::ErrorCode::ConfigInvalid,
                          "cannot create output directory " + config.paths.output_dir + ": " + ec.message());
    hemera::run_subcommand(name, config);
  } catch (const hemera::Error& e) {
    std::cerr << "hemera " << name << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "hemera " << name << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
