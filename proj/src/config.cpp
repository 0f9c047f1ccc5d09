#include "ldacp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

namespace ldacp {

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

[[noreturn]] void bad_value(const std::string& v, const char* what) {
  throw std::invalid_argument(fmt::format("expected {}, got '{}'", what, v));
}

template <class T>
T parse_number(const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(v, "a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(v, "true or false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) bad_value(v, "a comma-separated list without empty items");
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

template <class T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& f) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? "," : "") + f(items[i]);
  return s;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

class Registry {
 public:
  explicit Registry(std::string section) : section_(std::move(section)) {}

  Registry& section(std::string s) {
    section_ = std::move(s);
    return *this;
  }

  Registry& add(const std::string& key, double& ref) {
    return custom(key, [&ref](const std::string& v) { ref = parse_number<double>(v); },
                  [&ref] { return format_double(ref); });
  }
  Registry& add(const std::string& key, int& ref) {
    return custom(key, [&ref](const std::string& v) { ref = parse_number<int>(v); },
                  [&ref] { return std::to_string(ref); });
  }
  Registry& add(const std::string& key, std::int64_t& ref) {
    return custom(key, [&ref](const std::string& v) { ref = parse_number<std::int64_t>(v); },
                  [&ref] { return std::to_string(ref); });
  }
  Registry& add(const std::string& key, bool& ref) {
    return custom(key, [&ref](const std::string& v) { ref = parse_bool(v); },
                  [&ref] { return std::string(ref ? "true" : "false"); });
  }
  Registry& custom(const std::string& key, std::function<void(const std::string&)> set,
                   std::function<std::string()> get) {
    entries_.push_back({section_, key, std::move(set), std::move(get)});
    return *this;
  }

  std::vector<Entry>& entries() { return entries_; }

 private:
  std::string section_;
  std::vector<Entry> entries_;
};

std::vector<Entry> entries_of(RunConfig& c) {
  Registry r("run");
  r.custom("seed", [&c](const std::string& v) { c.seed = parse_number<std::uint64_t>(v); },
           [&c] { return std::to_string(c.seed); });

  GeneratorConfig& g = c.generator;
  r.section("generator")
      .add("n_samples", g.n_samples)
      .add("scale_log_mean", g.scale_log_mean)
      .add("scale_log_sigma", g.scale_log_sigma)
      .add("tail_probability", g.tail_probability)
      .add("tail_exponent", g.tail_exponent)
      .add("tail_scale", g.tail_scale)
      .add("max_scale", g.max_scale)
      .add("bias_sigma", g.bias_sigma)
      .add("bias_share_industry", g.bias_share_industry)
      .add("bias_share_product", g.bias_share_product)
      .add("bias_share_account", g.bias_share_account)
      .add("prior_noise_sigma", g.prior_noise_sigma)
      .add("z_expected_share", g.z_expected_share)
      .add("z_noise_sigma", g.z_noise_sigma)
      .add("delay_spread_sigma", g.delay_spread_sigma)
      .add("account_delay_sigma", g.account_delay_sigma)
      .add("window_min_minutes", g.window_min_minutes)
      .add("window_max_minutes", g.window_max_minutes)
      .add("label_horizon_minutes", g.label_horizon_minutes)
      .add("n_products", g.n_products)
      .add("n_objectives", g.n_objectives)
      .add("n_accounts", g.n_accounts)
      .add("n_days", g.n_days)
      .add("shard_size", g.shard_size)
      .add("check_calibration", g.check_calibration)
      .add("calibration_min_samples", g.calibration_min_samples);

  ModelConfig& m = c.model;
  r.section("model")
      .custom("kind", [&m](const std::string& v) { m.kind = model_kind_from_string(v); },
              [&m] { return to_string(m.kind); })
      .add("embedding_dim", m.embedding_dim)
      .custom(
          "trunk_widths",
          [&m](const std::string& v) {
            m.trunk_widths.clear();
            for (const auto& s : split_list(v)) m.trunk_widths.push_back(parse_number<int>(s));
          },
          [&m] { return join<int>(m.trunk_widths, [](const int& w) { return std::to_string(w); }); })
      .add("num_leaves", m.num_leaves)
      .custom("leaf_mode", [&m](const std::string& v) { m.leaf_mode = leaf_expectation_from_string(v); },
              [&m] { return to_string(m.leaf_mode); })
      .add("kernel_eps", m.kernel.eps)
      .add("kernel_sharpness", m.kernel.sharpness)
      .custom("label_mode", [&m](const std::string& v) { m.label_mode = label_mode_from_string(v); },
              [&m] { return to_string(m.label_mode); })
      .add("use_vrmp", m.use_vrmp);

  TrainConfig& t = c.train;
  r.section("train")
      .add("alpha", t.alpha)
      .add("beta", t.beta)
      .add("batch_size", t.batch_size)
      .add("lr", t.lr)
      .add("max_epochs", t.max_epochs)
      .add("patience", t.patience)
      .add("eps_y", t.eps_y)
      .add("joint_moe", t.joint_moe);

  r.section("metrics").add("zero_label_threshold", c.zero_label_threshold);

  AblationSettings& a = c.ablation;
  r.section("ablation")
      .custom(
          "seeds",
          [&a](const std::string& v) {
            a.seeds.clear();
            for (const auto& s : split_list(v)) a.seeds.push_back(parse_number<std::uint64_t>(s));
          },
          [&a] { return join<std::uint64_t>(a.seeds, [](const std::uint64_t& s) { return std::to_string(s); }); })
      .custom(
          "variants",
          [&a](const std::string& v) {
            a.variants.clear();
            for (const auto& s : split_list(v)) a.variants.push_back(variant_from_string(s));
          },
          [&a] { return join<Variant>(a.variants, [](const Variant& v) { return to_string(v); }); });

  ScenarioConfig& s = c.scenario;
  r.section("scenario")
      .add("campaigns", s.campaigns)
      .add("horizon_minutes", s.horizon_minutes)
      .add("interval_minutes", s.interval_minutes)
      .add("impressions_per_interval", s.impressions_per_interval)
      .add("target_cpa", s.target_cpa)
      .add("budget_factor", s.budget_factor)
      .add("coef_min", s.coef_min)
      .add("coef_max", s.coef_max)
      .add("step_clip_lo", s.step_clip_lo)
      .add("step_clip_hi", s.step_clip_hi)
      .add("win_scale", s.win_scale)
      .add("cr_lo", s.cr_lo)
      .add("cr_hi", s.cr_hi)
      .add("zero_delay", s.zero_delay)
      .custom(
          "campaign_type",
          [&s](const std::string& v) {
            if (v == "mixed") {
              s.campaign_type.reset();
            } else {
              s.campaign_type = campaign_type_from_string(v);
            }
          },
          [&s] { return s.campaign_type ? std::string(name(*s.campaign_type)) : std::string("mixed"); });
  return std::move(r.entries());
}

}  // namespace

void RunConfig::propagate() {
  generator.seed = seed;
  train.seed = seed;
  model.n_products = generator.n_products;
  model.n_objectives = generator.n_objectives;
  scenario.seed = seed;
  scenario.world = generator;
  scenario.z_expected_share = generator.z_expected_share;
}

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  propagate();
}

void RunConfig::validate() const {
  generator.validate();
  model.validate();
  train.validate();
  scenario.validate();
  if (!(zero_label_threshold >= 0.0)) throw std::invalid_argument("metrics: zero_label_threshold must be >= 0");
  if (ablation.seeds.empty()) throw std::invalid_argument("ablation: seeds must not be empty");
}

RunConfig parse_run_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(fmt::format("config: line {}: {}", e.line(), e.message()));
  }
  RunConfig config;
  auto entries = entries_of(config);
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw std::invalid_argument(fmt::format("config: key '{}' outside a section", section));
    for (const auto& [key, value] : body) {
      Entry* hit = nullptr;
      for (auto& e : entries) {
        if (e.section == section && e.key == key) hit = &e;
      }
      if (!hit) throw std::invalid_argument(fmt::format("config: unknown key [{}] {}", section, key));
      try {
        hit->set(value.data());
      } catch (const std::exception& e) {
        throw std::invalid_argument(fmt::format("config: [{}] {}: {}", section, key, e.what()));
      }
    }
  }
  config.propagate();
  return config;
}

RunConfig parse_run_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  try {
    return parse_run_config(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

void write_run_config(const RunConfig& config, std::ostream& out) {
  RunConfig copy = config;
  std::string current;
  for (const auto& e : entries_of(copy)) {
    if (e.section != current) {
      out << (current.empty() ? "" : "\n") << '[' << e.section << "]\n";
      current = e.section;
    }
    out << e.key << " = " << e.get() << '\n';
  }
}

std::string run_config_to_string(const RunConfig& config) {
  std::ostringstream out;
  write_run_config(config, out);
  return out.str();
}

}  // namespace ldacp
