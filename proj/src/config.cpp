#include "orlab/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace orlab {
namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(int line, const std::string& message) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + message);
}

long long parse_int(const std::string& value, int line) {
    long long out = 0;
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto result = std::from_chars(first, last, out);
    if (result.ec != std::errc{} || result.ptr != last) {
        fail(line, "expected an integer, got '" + value + "'");
    }
    return out;
}

double parse_double(const std::string& value, int line) {
    try {
        std::size_t used = 0;
        const double out = std::stod(value, &used);
        if (used != value.size()) fail(line, "expected a number, got '" + value + "'");
        return out;
    } catch (const std::invalid_argument&) {
        fail(line, "expected a number, got '" + value + "'");
    } catch (const std::out_of_range&) {
        fail(line, "number out of range: '" + value + "'");
    }
}

bool parse_bool(const std::string& value, int line) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(line, "expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) parts.push_back(t);
    }
    return parts;
}

}  // namespace

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    cfg.env.kind = EnvKind::Summod;
    cfg.env.alphabet = 6;
    cfg.env.horizon = 3;
    cfg.env.modulus = 5;
    cfg.env.context_mode = ContextMode::PrevToken;
    return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg = default_experiment_config();
    std::stringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(line_no, "empty key");
        if (value.empty()) fail(line_no, "empty value for key '" + key + "'");

        if (key == "env.kind") {
            if (value == "summod") {
                cfg.env.kind = EnvKind::Summod;
            } else if (value == "treepath") {
                cfg.env.kind = EnvKind::Treepath;
            } else {
                fail(line_no, "env.kind must be summod or treepath");
            }
        } else if (key == "env.alphabet") {
            cfg.env.alphabet = static_cast<int>(parse_int(value, line_no));
        } else if (key == "env.horizon") {
            cfg.env.horizon = static_cast<int>(parse_int(value, line_no));
        } else if (key == "env.modulus") {
            cfg.env.modulus = static_cast<int>(parse_int(value, line_no));
        } else if (key == "env.context_mode") {
            if (value == "prev_token") {
                cfg.env.context_mode = ContextMode::PrevToken;
            } else if (value == "full_prefix") {
                cfg.env.context_mode = ContextMode::FullPrefix;
            } else {
                fail(line_no, "env.context_mode must be prev_token or full_prefix");
            }
        } else if (key == "bank.count") {
            cfg.bank_count = static_cast<int>(parse_int(value, line_no));
        } else if (key == "bank.seed") {
            cfg.bank_seed = static_cast<std::uint64_t>(parse_int(value, line_no));
        } else if (key == "train.batch_questions") {
            cfg.train.batch_questions = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.rollouts") {
            cfg.train.rollouts = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.iterations") {
            cfg.train.iterations = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.policy_lr") {
            cfg.train.policy_lr = parse_double(value, line_no);
        } else if (key == "train.credit_lr") {
            cfg.train.credit_lr = parse_double(value, line_no);
        } else if (key == "train.warmup_steps") {
            cfg.train.warmup_steps = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.beta") {
            cfg.train.beta = parse_double(value, line_no);
        } else if (key == "train.eta") {
            cfg.train.eta = parse_double(value, line_no);
        } else if (key == "train.gamma") {
            cfg.train.gamma = parse_double(value, line_no);
        } else if (key == "train.advantage_mode") {
            if (value == "shaped") {
                cfg.train.advantage_mode = AdvantageMode::Shaped;
            } else if (value == "rloo") {
                cfg.train.advantage_mode = AdvantageMode::Rloo;
            } else if (value == "grpo") {
                cfg.train.advantage_mode = AdvantageMode::Grpo;
            } else {
                fail(line_no, "train.advantage_mode must be shaped, rloo, or grpo");
            }
        } else if (key == "train.filter_lo") {
            cfg.train.filter_lo = parse_double(value, line_no);
        } else if (key == "train.filter_hi") {
            cfg.train.filter_hi = parse_double(value, line_no);
        } else if (key == "train.seed") {
            cfg.train.seed = static_cast<std::uint64_t>(parse_int(value, line_no));
        } else if (key == "train.eval_every") {
            cfg.train.eval_every = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.rft_samples") {
            cfg.train.rft_samples = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.rft_bc_steps") {
            cfg.train.rft_bc_steps = static_cast<int>(parse_int(value, line_no));
        } else if (key == "train.rft_lr") {
            cfg.train.rft_lr = parse_double(value, line_no);
        } else if (key == "train.verifier_noise") {
            cfg.train.verifier_noise = parse_double(value, line_no);
        } else if (key == "ablation.reward_shaping") {
            cfg.flags.reward_shaping = parse_bool(value, line_no);
        } else if (key == "ablation.behavior_cloning") {
            cfg.flags.behavior_cloning = parse_bool(value, line_no);
        } else if (key == "ablation.token_weights") {
            cfg.flags.token_weights = parse_bool(value, line_no);
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (key == "seeds") {
            cfg.seeds.clear();
            for (const std::string& part : split_list(value)) {
                cfg.seeds.push_back(static_cast<std::uint64_t>(parse_int(part, line_no)));
            }
            if (cfg.seeds.empty()) fail(line_no, "seeds list is empty");
        } else if (key == "bon.n_list") {
            cfg.bon_n_list.clear();
            for (const std::string& part : split_list(value)) {
                cfg.bon_n_list.push_back(static_cast<int>(parse_int(part, line_no)));
            }
            if (cfg.bon_n_list.empty()) fail(line_no, "bon.n_list is empty");
        } else if (key == "bon.draws") {
            cfg.bon_draws = static_cast<std::uint64_t>(parse_int(value, line_no));
        } else if (key == "analysis.alpha") {
            cfg.analysis_alphas.clear();
            for (const std::string& part : split_list(value)) {
                cfg.analysis_alphas.push_back(parse_double(part, line_no));
            }
            if (cfg.analysis_alphas.empty()) fail(line_no, "analysis.alpha is empty");
        } else {
            fail(line_no, "unknown key '" + key + "'");
        }
    }
    validate_experiment_config(cfg);
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::invalid_argument("cannot open config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void apply_variant(ExperimentConfig& cfg, const std::string& name) {
    cfg.flags = variant_flags(name);
}

void validate_experiment_config(const ExperimentConfig& cfg) {
    validate_env(cfg.env);
    validate_train_config(cfg.train);
    variant_name(cfg.flags);
    if (cfg.bank_count < 1) {
        throw std::invalid_argument("bank.count must be >= 1");
    }
    if (cfg.out_dir.empty()) {
        throw std::invalid_argument("out directory must not be empty");
    }
    if (cfg.seeds.empty()) {
        throw std::invalid_argument("seeds list must not be empty");
    }
    for (int n : cfg.bon_n_list) {
        if (n < 1) throw std::invalid_argument("bon.n_list entries must be >= 1");
    }
    if (cfg.bon_draws < 1000) {
        throw std::invalid_argument("bon.draws must be >= 1000");
    }
    for (double a : cfg.analysis_alphas) {
        if (!(a > 0.0)) throw std::invalid_argument("analysis.alpha entries must be > 0");
    }
}

std::string config_schema_help() {
    return R"(Config file: one `key = value` per line, '#' starts a comment.

env.kind              summod | treepath            (default summod)
env.alphabet          tokens per step              (default 6)
env.horizon           steps per trajectory         (default 3)
env.modulus           answer modulus               (default 5)
env.context_mode      prev_token | full_prefix     (default prev_token)
bank.count            questions in the bank        (default 64)
bank.seed             bank generation seed         (default 7)
train.batch_questions questions per iteration      (default 16)
train.rollouts        rollouts per question        (default 16)
train.iterations      training iterations          (default 200)
train.policy_lr       policy step size             (default 0.5)
train.credit_lr       credit-table step size       (default 2.0)
train.warmup_steps    credit lr warm-up span       (default 10)
train.beta            KL regularizer weight        (default 0.01)
train.eta             negative-loss balance        (default 1.0)
train.gamma           discount (advantages)        (default 1.0)
train.advantage_mode  shaped | rloo | grpo         (default shaped)
train.filter_lo       curation band, lower open    (default 0.0)
train.filter_hi       curation band, upper open    (default 0.8)
train.seed            training seed                (default 1)
train.eval_every      best-checkpoint cadence      (default 10)
train.rft_samples     init rollouts per question   (default 2)
train.rft_bc_steps    init cloning steps           (default 20)
train.rft_lr          init cloning step size       (default 0.5)
train.verifier_noise  false-negative probability   (default 0.0)
ablation.reward_shaping   true|false               (default true)
ablation.behavior_cloning true|false               (default true)
ablation.token_weights    true|false               (default true)
out                   output directory             (default runs/out)
seeds                 comma list for ablation      (default 1,2,3,4,5)
bon.n_list            comma list of n              (default 1,2,4,8,16)
bon.draws             Monte-Carlo draws            (default 200000)
analysis.alpha        comma list of KL weights     (default 0.1,1,10)
)";
}

BonVerifyOptions bon_options_from(const ExperimentConfig& cfg) {
    BonVerifyOptions opt;
    opt.n_list = cfg.bon_n_list;
    opt.draws = cfg.bon_draws;
    opt.alphas = cfg.analysis_alphas;
    opt.seed = cfg.train.seed;
    return opt;
}

}  // namespace orlab
