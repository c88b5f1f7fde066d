// Command-line front end. Talks to the library only through frnet.h.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "frnet/frnet.h"

namespace {

struct Failure {
  frnet_status status;
};

void check(frnet_status status) {
  if (status != FRNET_OK) throw Failure{status};
}

struct VolumeDeleter {
  void operator()(frnet_volume* v) const { frnet_volume_free(v); }
};
struct ModelDeleter {
  void operator()(frnet_model* m) const { frnet_model_free(m); }
};
using VolumePtr = std::unique_ptr<frnet_volume, VolumeDeleter>;
using ModelPtr = std::unique_ptr<frnet_model, ModelDeleter>;

VolumePtr read_volume(const std::string& path) {
  frnet_volume* v = nullptr;
  check(frnet_volume_read(path.c_str(), &v));
  return VolumePtr(v);
}

ModelPtr load_model(const std::string& path) {
  frnet_model* m = nullptr;
  check(frnet_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

const std::map<std::string, frnet_arch> kArchs{{"frnet", FRNET_ARCH_FRNET}, {"unet", FRNET_ARCH_UNET}};
const std::map<std::string, frnet_loss> kLosses{
    {"ce", FRNET_LOSS_CE}, {"wce", FRNET_LOSS_WCE}, {"focal", FRNET_LOSS_FOCAL}, {"boundary", FRNET_LOSS_BOUNDARY}};

struct TrainArgs {
  std::vector<std::string> archs{"frnet"};
  std::vector<std::string> losses{"boundary"};
  double lr = 0.003;
  std::size_t epochs = 10;
  std::size_t levels = 4;
  std::size_t base = 16;
  std::size_t batch_size = 1;
  std::vector<double> sigmas;
  std::vector<double> alpha{1.0, 1.0};
  double gamma = 2.0;
  double density_sigma = 3.0;
  double density_floor = 0.05;
  bool reorient = false;
  bool resize = false;
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 0;
  std::string manifest;
  std::string out;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a, bool multi) {
  auto* arch = cmd->add_option("--arch", a.archs, multi ? "Architectures (comma list)" : "Architecture")
                   ->check(CLI::IsMember({"frnet", "unet"}));
  auto* loss = cmd->add_option("--loss", a.losses, multi ? "Losses (comma list)" : "Loss")
                   ->check(CLI::IsMember({"ce", "wce", "focal", "boundary"}));
  if (multi) {
    arch->delimiter(',');
    loss->delimiter(',');
  } else {
    arch->expected(1);
    loss->expected(1);
  }
  cmd->add_option("--lr", a.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--epochs", a.epochs)->capture_default_str();
  cmd->add_option("--levels", a.levels, "Resolution levels")->capture_default_str();
  cmd->add_option("--base", a.base, "Channels at full resolution")->capture_default_str();
  cmd->add_option("--batch-size", a.batch_size)->capture_default_str();
  cmd->add_option("--sigma", a.sigmas, "Motion-artifact sigmas for on-the-fly augmentation")->delimiter(',');
  cmd->add_option("--alpha", a.alpha, "Per-class weights for wce")->delimiter(',')->expected(2);
  cmd->add_option("--gamma", a.gamma, "Focal exponent")->capture_default_str();
  cmd->add_option("--density-sigma", a.density_sigma)->capture_default_str();
  cmd->add_option("--density-floor", a.density_floor)->capture_default_str();
  cmd->add_flag("--reorient", a.reorient, "Random axis permutations and flips");
  cmd->add_flag("--resize", a.resize, "Random isotropic rescaling");
  cmd->add_option("--checkpoint-every", a.checkpoint_every, "Epochs between checkpoints (0 = final only)");
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--manifest", a.manifest)->required();
  cmd->add_option("--out", a.out, "Output directory")->required();
}

frnet_train_options make_options(const TrainArgs& a, const std::string& arch, const std::string& loss) {
  frnet_train_options o;
  frnet_train_options_init(&o);
  o.arch = kArchs.at(arch);
  o.loss = kLosses.at(loss);
  o.levels = a.levels;
  o.base_channels = a.base;
  o.alpha[0] = a.alpha[0];
  o.alpha[1] = a.alpha[1];
  o.gamma = a.gamma;
  o.density_sigma = a.density_sigma;
  o.density_floor = a.density_floor;
  o.learning_rate = a.lr;
  o.epochs = a.epochs;
  o.batch_size = a.batch_size;
  o.reorient = a.reorient;
  o.resize = a.resize;
  o.artifact_sigmas = a.sigmas.empty() ? nullptr : a.sigmas.data();
  o.artifact_sigma_count = a.sigmas.size();
  o.checkpoint_every = a.checkpoint_every;
  frnet_train_options_seed(&o, a.seed);
  return o;
}

void print_record(const char* record, void*) {
  std::fputs(record, stdout);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

std::string format_cell(const nlohmann::json& s) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f +/- %.4f", s.at("mean").get<double>(), s.at("std").get<double>());
  return buf;
}

// Groups as columns plus an overall column, one row per method.
void print_table(const nlohmann::json& report, const std::string& label) {
  std::vector<std::string> header{"method"};
  std::vector<std::string> row{label};
  for (const auto& g : report.at("groups")) {
    header.push_back(g.at("group").get<std::string>() + " (n=" + std::to_string(g.at("n").get<int>()) + ")");
    row.push_back(format_cell(g));
  }
  header.push_back("overall (n=" + std::to_string(report.at("overall").at("n").get<int>()) + ")");
  row.push_back(format_cell(report.at("overall")));

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = std::max(header[i].size(), row[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += " " + cells[i] + std::string(width[i] - cells[i].size(), ' ') + " |";
    }
    std::cout << out << "\n";
  };
  line(header);
  std::string rule = "|";
  for (auto w : width) rule += std::string(w + 2, '-') + "|";
  std::cout << rule << "\n";
  line(row);
  if (!report.at("complete").get<bool>()) {
    std::cout << "warning: report incomplete, failed entries:\n";
    for (const auto& v : report.at("volumes")) {
      if (!v.at("ok").get<bool>()) std::cout << "  " << v.at("volume").get<std::string>() << ": " << v.at("error").get<std::string>() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"frnet: 3D brain-mask segmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", frnet_version());

  // phantom gen
  auto* phantom = app.add_subcommand("phantom", "Synthetic head phantoms");
  phantom->require_subcommand(1);
  auto* gen = phantom->add_subcommand("gen", "Generate a phantom dataset with manifest.json");
  frnet_phantom_options popt;
  frnet_phantom_options_init(&popt);
  std::string groups = popt.groups;
  std::string gen_out;
  gen->add_option("--n", popt.count, "Number of phantoms")->capture_default_str();
  gen->add_option("--extent", popt.extent, "Cube edge length")->capture_default_str();
  gen->add_option("--groups", groups, "Group count or comma list of group names")->capture_default_str();
  gen->add_option("--seed", popt.seed)->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  // split
  auto* split = app.add_subcommand("split", "Stratified train/test split, rewrites the manifest");
  std::string split_manifest;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--test-fraction", test_fraction)->capture_default_str();
  split->add_option("--seed", split_seed)->capture_default_str();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Apply a k-space motion artifact to one volume");
  std::string sim_in, sim_out, readout = "x";
  double sim_sigma = 0.0;
  std::uint64_t sim_seed = 0;
  simulate->add_option("--in", sim_in)->required();
  simulate->add_option("--sigma", sim_sigma)->required();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--readout", readout)->check(CLI::IsMember({"x", "y", "z"}))->capture_default_str();
  simulate->add_option("--out", sim_out)->required();

  // corrupt
  auto* corrupt = app.add_subcommand("corrupt", "Append motion-corrupted copies of every manifest entry");
  std::string cor_manifest, cor_out;
  std::vector<double> cor_sigmas{0.3, 1.0};
  std::uint64_t cor_seed = 0;
  corrupt->add_option("--manifest", cor_manifest)->required();
  corrupt->add_option("--sigma", cor_sigmas)->delimiter(',')->capture_default_str();
  corrupt->add_option("--seed", cor_seed)->capture_default_str();
  corrupt->add_option("--out", cor_out, "Output directory (volumes and manifest.json)")->required();

  // density-map
  auto* density = app.add_subcommand("density-map", "Boundary density weight map of a mask");
  std::string dm_mask, dm_out;
  double dm_sigma = 3.0, dm_floor = 0.05;
  density->add_option("--mask", dm_mask)->required();
  density->add_option("--sigma", dm_sigma)->capture_default_str();
  density->add_option("--floor", dm_floor)->capture_default_str();
  density->add_option("--out", dm_out)->required();

  // train
  auto* train = app.add_subcommand("train", "Train one model, streaming history records to stdout");
  TrainArgs train_args;
  add_train_flags(train, train_args, false);

  // cross-validate
  auto* cv = app.add_subcommand("cross-validate", "k-fold selection over arch x loss candidates");
  TrainArgs cv_args;
  std::size_t k = 2;
  add_train_flags(cv, cv_args, true);
  cv->add_option("--k", k, "Number of folds")->capture_default_str();

  // segment
  auto* seg = app.add_subcommand("segment", "Predict a brain mask");
  std::string seg_ckpt, seg_in, seg_out;
  seg->add_option("--checkpoint", seg_ckpt)->required();
  seg->add_option("--in", seg_in)->required();
  seg->add_option("--out", seg_out)->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Dice report over a manifest split");
  std::string ev_ckpt, ev_manifest, ev_report, ev_split = "test", ev_label;
  evaluate->add_option("--checkpoint", ev_ckpt)->required();
  evaluate->add_option("--manifest", ev_manifest)->required();
  evaluate->add_option("--report", ev_report)->required();
  evaluate->add_option("--split", ev_split)->capture_default_str();
  evaluate->add_option("--label", ev_label, "Row label in the printed table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      popt.groups = groups.c_str();
      check(frnet_phantom_generate(&popt, gen_out.c_str()));
      std::cout << "wrote " << popt.count << " phantoms to " << gen_out << "\n";
    } else if (*split) {
      check(frnet_manifest_split(split_manifest.c_str(), test_fraction, split_seed));
    } else if (*simulate) {
      auto in = read_volume(sim_in);
      frnet_volume* out = nullptr;
      check(frnet_simulate_motion(in.get(), sim_sigma, sim_seed, readout[0], &out));
      VolumePtr owned(out);
      check(frnet_volume_write(owned.get(), sim_out.c_str()));
    } else if (*corrupt) {
      const std::string manifest_out = cor_out + "/manifest.json";
      std::size_t errors = 0;
      check(frnet_corrupt_dataset(cor_manifest.c_str(), cor_sigmas.data(), cor_sigmas.size(), cor_seed,
                                  cor_out.c_str(), manifest_out.c_str(), &errors));
      if (errors > 0) std::cerr << "frnet: " << errors << " entries could not be read and were skipped\n";
    } else if (*density) {
      auto mask = read_volume(dm_mask);
      frnet_volume* out = nullptr;
      int empty = 0;
      check(frnet_density_map(mask.get(), dm_sigma, dm_floor, &out, &empty));
      VolumePtr owned(out);
      check(frnet_volume_write(owned.get(), dm_out.c_str()));
      if (empty) std::cerr << "frnet: mask has no boundary, map is uniform at the floor\n";
    } else if (*train) {
      const auto o = make_options(train_args, train_args.archs.at(0), train_args.losses.at(0));
      check(frnet_train(&o, train_args.manifest.c_str(), train_args.out.c_str(), print_record, nullptr));
    } else if (*cv) {
      std::vector<frnet_train_options> candidates;
      for (const auto& a : cv_args.archs) {
        for (const auto& l : cv_args.losses) candidates.push_back(make_options(cv_args, a, l));
      }
      std::size_t selected = 0;
      check(frnet_cross_validate(candidates.data(), candidates.size(), k, cv_args.seed, cv_args.manifest.c_str(),
                                 cv_args.out.c_str(), &selected));
      std::ifstream in(cv_args.out + "/cv_report.json");
      std::cout << in.rdbuf();
    } else if (*seg) {
      auto model = load_model(seg_ckpt);
      auto in = read_volume(seg_in);
      frnet_volume* out = nullptr;
      check(frnet_model_segment(model.get(), in.get(), &out));
      VolumePtr owned(out);
      check(frnet_volume_write(owned.get(), seg_out.c_str()));
    } else if (*evaluate) {
      auto model = load_model(ev_ckpt);
      int complete = 0;
      check(frnet_evaluate(model.get(), ev_manifest.c_str(), ev_split.c_str(), ev_report.c_str(), nullptr, &complete));
      std::ifstream in(ev_report);
      print_table(nlohmann::json::parse(in), ev_label.empty() ? ev_ckpt : ev_label);
      return complete ? 0 : 3;
    }
  } catch (const Failure& f) {
    std::cerr << "frnet: " << frnet_status_string(f.status) << ": " << frnet_last_error() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "frnet: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
