#include "ldacp/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ldacp {

using nlohmann::ordered_json;

namespace {

ordered_json model_config_json(const ModelConfig& c) {
  return {{"kind", to_string(c.kind)},
          {"embedding_dim", c.embedding_dim},
          {"trunk_widths", c.trunk_widths},
          {"num_leaves", c.num_leaves},
          {"leaf_expectation", to_string(c.leaf_mode)},
          {"kernel_eps", c.kernel.eps},
          {"kernel_sharpness", c.kernel.sharpness},
          {"label_mode", to_string(c.label_mode)},
          {"use_vrmp", c.use_vrmp},
          {"n_products", c.n_products},
          {"n_objectives", c.n_objectives}};
}

ModelConfig model_config_from(const ordered_json& j) {
  ModelConfig c;
  c.kind = model_kind_from_string(j.at("kind").get<std::string>());
  c.embedding_dim = j.at("embedding_dim").get<int>();
  c.trunk_widths = j.at("trunk_widths").get<std::vector<int>>();
  c.num_leaves = j.at("num_leaves").get<int>();
  c.leaf_mode = leaf_expectation_from_string(j.at("leaf_expectation").get<std::string>());
  c.kernel.eps = j.at("kernel_eps").get<double>();
  c.kernel.sharpness = j.at("kernel_sharpness").get<double>();
  c.label_mode = label_mode_from_string(j.at("label_mode").get<std::string>());
  c.use_vrmp = j.at("use_vrmp").get<bool>();
  c.n_products = j.at("n_products").get<int>();
  c.n_objectives = j.at("n_objectives").get<int>();
  return c;
}

ordered_json train_config_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},           {"beta", c.beta},         {"batch_size", c.batch_size},
          {"lr", c.lr},                 {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"eps_y", c.eps_y},           {"joint_moe", c.joint_moe}, {"seed", c.seed}};
}

TrainConfig train_config_from(const ordered_json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lr = j.at("lr").get<double>();
  c.max_epochs = j.at("max_epochs").get<int>();
  c.patience = j.at("patience").get<int>();
  c.eps_y = j.at("eps_y").get<double>();
  c.joint_moe = j.at("joint_moe").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ordered_json tree_json(const BucketTree& tree) {
  ordered_json nodes = ordered_json::array();
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const TreeNode& n = tree.nodes()[i];
    if (!n.present) continue;
    ordered_json node = {{"index", i}, {"l", n.lo}, {"r", n.hi}, {"leaf", n.leaf}};
    if (n.leaf) {
      node["e"] = n.expectation;
    } else {
      node["m"] = n.cut;
    }
    nodes.push_back(node);
  }
  return {{"depth", tree.depth()}, {"leaves", tree.leaves()}, {"nodes", nodes}};
}

BucketTree tree_from(const ordered_json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j.at("nodes")) {
    const auto i = n.at("index").get<std::size_t>();
    if (i >= nodes.size()) nodes.resize(i + 1);
    TreeNode& t = nodes[i];
    t.present = true;
    t.lo = n.at("l").get<std::int64_t>();
    t.hi = n.at("r").get<std::int64_t>();
    t.leaf = n.at("leaf").get<bool>();
    if (t.leaf) {
      t.expectation = n.at("e").get<double>();
    } else {
      t.cut = n.at("m").get<std::int64_t>();
    }
  }
  BucketTree tree = BucketTree::from_nodes(std::move(nodes));
  if (tree.depth() != j.at("depth").get<int>() || tree.leaves() != j.at("leaves").get<std::vector<int>>()) {
    throw std::runtime_error("checkpoint: stored tree depth or leaf list disagrees with its nodes");
  }
  return tree;
}

}  // namespace

std::string checkpoint_to_string(const TrainState& state) {
  const Model& m = state.model;
  const ModelConfig& c = m.config();
  ordered_json j;
  j["format"] = "ldacp-checkpoint";
  j["version"] = kCheckpointVersion;
  j["model"] = model_config_json(c);
  j["layout"] = {{"input_dim", m.input_dim()},
                 {"parameter_count", m.parameter_count()},
                 {"vocab",
                  {{"industry", kNumIndustries + 1},
                   {"product", c.n_products + 1},
                   {"objective", c.n_objectives + 1},
                   {"campaign_type", kNumCampaignTypes + 1}}}};
  j["normalizer"] = {{"mean", m.normalizer().mean}, {"scale", m.normalizer().scale}};
  if (c.kind == ModelKind::kLdacp) j["tree"] = tree_json(m.tree());
  j["train"] = train_config_json(state.config);
  j["epochs_done"] = state.epochs_done;
  j["best_val_mape"] = state.best_val_mape;
  j["params"] = m.params();
  j["adam"] = {{"step", state.adam.step},
               {"lr", state.adam.lr},
               {"beta1", state.adam.beta1},
               {"beta2", state.adam.beta2},
               {"eps", state.adam.eps},
               {"first_moment", state.adam.first_moment},
               {"second_moment", state.adam.second_moment}};
  return j.dump();
}

TrainState checkpoint_from_string(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint: malformed JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "ldacp-checkpoint") throw std::runtime_error("checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw std::runtime_error("checkpoint: unsupported version " + j.at("version").dump());
    }
    const ModelConfig config = model_config_from(j.at("model"));
    FeatureNormalizer norm;
    norm.mean = j.at("normalizer").at("mean").get<std::array<double, kDenseFeatureCount>>();
    norm.scale = j.at("normalizer").at("scale").get<std::array<double, kDenseFeatureCount>>();
    BucketTree tree = config.kind == ModelKind::kLdacp ? tree_from(j.at("tree")) : BucketTree();
    Model model = Model::assemble(config, norm, std::move(tree), j.at("params").get<std::vector<double>>());
    if (model.parameter_count() != j.at("layout").at("parameter_count").get<std::size_t>()) {
      throw std::runtime_error("checkpoint: parameter count disagrees with layout");
    }
    nn::AdamState adam;
    const auto& a = j.at("adam");
    adam.step = a.at("step").get<std::int64_t>();
    adam.lr = a.at("lr").get<double>();
    adam.beta1 = a.at("beta1").get<double>();
    adam.beta2 = a.at("beta2").get<double>();
    adam.eps = a.at("eps").get<double>();
    adam.first_moment = a.at("first_moment").get<std::vector<double>>();
    adam.second_moment = a.at("second_moment").get<std::vector<double>>();
    TrainState state{std::move(model), std::move(adam), train_config_from(j.at("train")),
                     j.at("epochs_done").get<int>(), j.at("best_val_mape").get<double>()};
    return state;
  } catch (const ordered_json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_string(state);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_string(buf.str());
}

}  // namespace ldacp
