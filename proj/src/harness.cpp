#include "orlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"

#include "orlab/bon.hpp"
#include "orlab/bon_verify.hpp"
#include "orlab/credit.hpp"
#include "orlab/rng.hpp"
#include "orlab/trainer.hpp"

namespace orlab {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["env"] = {{"kind", env_kind_name(cfg.env.kind)},
                {"alphabet", cfg.env.alphabet},
                {"horizon", cfg.env.horizon},
                {"modulus", cfg.env.modulus},
                {"context_mode", context_mode_name(cfg.env.context_mode)}};
    j["bank"] = {{"count", cfg.bank_count}, {"seed", cfg.bank_seed}};
    j["train"] = {{"batch_questions", cfg.train.batch_questions},
                  {"rollouts", cfg.train.rollouts},
                  {"iterations", cfg.train.iterations},
                  {"policy_lr", cfg.train.policy_lr},
                  {"credit_lr", cfg.train.credit_lr},
                  {"warmup_steps", cfg.train.warmup_steps},
                  {"beta", cfg.train.beta},
                  {"eta", cfg.train.eta},
                  {"gamma", cfg.train.gamma},
                  {"advantage_mode", advantage_mode_name(cfg.train.advantage_mode)},
                  {"filter_lo", cfg.train.filter_lo},
                  {"filter_hi", cfg.train.filter_hi},
                  {"seed", cfg.train.seed},
                  {"eval_every", cfg.train.eval_every},
                  {"rft_samples", cfg.train.rft_samples},
                  {"rft_bc_steps", cfg.train.rft_bc_steps},
                  {"rft_lr", cfg.train.rft_lr},
                  {"verifier_noise", cfg.train.verifier_noise}};
    j["ablation"] = {{"reward_shaping", cfg.flags.reward_shaping},
                     {"behavior_cloning", cfg.flags.behavior_cloning},
                     {"token_weights", cfg.flags.token_weights},
                     {"variant", variant_name(cfg.flags)}};
    j["bon"] = {{"n_list", cfg.bon_n_list}, {"draws", cfg.bon_draws}};
    j["analysis"] = {{"alpha", cfg.analysis_alphas}};
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path.string());
    }
    out << text;
}

json metrics_record(const std::string& run_id, const IterationMetrics& m) {
    return json{{"run_id", run_id},
                {"iteration", m.iteration},
                {"mean_pass_rate", m.mean_pass_rate},
                {"kept_groups", m.kept_groups},
                {"skipped", m.skipped},
                {"loss_total", m.loss_total},
                {"loss_positive", m.loss_positive},
                {"loss_negative", m.loss_negative},
                {"kl", m.kl},
                {"credit_loss", m.credit_loss},
                {"greedy_success", m.greedy_success}};
}

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size();
    if (k == 0) return 0.0;
    if (k % 2 == 1) return values[k / 2];
    return 0.5 * (values[k / 2 - 1] + values[k / 2]);
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

}  // namespace

std::string run_identifier(const ExperimentConfig& cfg) {
    return variant_name(cfg.flags) + "-seed" + std::to_string(cfg.train.seed);
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
    validate_experiment_config(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    const auto t_start = std::chrono::steady_clock::now();
    const std::vector<Question> bank = question_bank(cfg.env, cfg.bank_count, cfg.bank_seed);
    write_bank_csv((out / "bank.csv").string(), bank);

    const TrainResult result = train(cfg.env, bank, cfg.train, cfg.flags);
    const auto t_end = std::chrono::steady_clock::now();
    const std::string run_id = run_identifier(cfg);

    {
        std::ofstream metrics(out / "metrics.jsonl");
        if (!metrics) {
            throw std::runtime_error("cannot write metrics.jsonl under " + cfg.out_dir);
        }
        for (const IterationMetrics& m : result.metrics) {
            metrics << metrics_record(run_id, m).dump() << "\n";
        }
    }
    {
        std::ofstream curve(out / "curve.csv");
        curve << "iteration,greedy_success\n";
        for (const IterationMetrics& m : result.metrics) {
            curve << m.iteration << "," << json(m.greedy_success).dump() << "\n";
        }
    }

    json summary;
    summary["run_id"] = run_id;
    summary["variant"] = variant_name(cfg.flags);
    summary["init_success"] = result.init_success;
    summary["final_success"] = result.final_success;
    summary["best_success"] = result.best_success;
    summary["best_iteration"] = result.best_iteration;
    summary["rft_positives"] = result.rft_positives;
    summary["rft_warning"] = result.rft_warning;
    summary["curated_questions"] = result.curated_questions;
    summary["iterations"] = static_cast<int>(result.metrics.size());
    summary["config"] = config_to_json(cfg);
    write_text(out / "summary.json", summary.dump(2) + "\n");

    save_policy((out / "policy_final.txt").string(), result.policy);
    save_policy((out / "policy_best.txt").string(), result.best_policy);
    save_policy((out / "policy_rft.txt").string(), result.rft_policy);
    save_credit((out / "credit_final.txt").string(), result.credit);
    save_credit((out / "credit_best.txt").string(), result.best_credit);

    const double seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(t_end - t_start).count();
    std::ostringstream timing;
    timing << "run_id " << run_id << "\n"
           << "train_seconds " << seconds << "\n";
    write_text(out / "timing.txt", timing.str());

    log << "[run] " << run_id << ": init " << result.init_success << ", final "
        << result.final_success << ", best " << result.best_success << " @ iteration "
        << result.best_iteration << " (" << result.curated_questions
        << " curated questions) -> " << cfg.out_dir << "\n";
    return 0;
}

int run_ablation(const ExperimentConfig& cfg, std::ostream& log) {
    validate_experiment_config(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    std::ostringstream csv;
    csv << "variant";
    for (std::uint64_t seed : cfg.seeds) {
        csv << ",seed_" << seed;
    }
    csv << ",final_mean,final_median\n";

    for (const std::string& name : variant_ladder()) {
        std::vector<double> finals;
        for (std::uint64_t seed : cfg.seeds) {
            ExperimentConfig sub = cfg;
            apply_variant(sub, name);
            sub.train.seed = seed;
            sub.out_dir = (out / name / ("seed" + std::to_string(seed))).string();
            run_experiment(sub, log);

            std::ifstream in(fs::path(sub.out_dir) / "summary.json");
            if (!in) {
                throw std::runtime_error("ablation run left no summary under " + sub.out_dir);
            }
            json summary = json::parse(in);
            finals.push_back(summary.at("final_success").get<double>());
        }
        csv << name;
        for (double v : finals) {
            csv << "," << json(v).dump();
        }
        csv << "," << json(mean_of(finals)).dump() << "," << json(median_of(finals)).dump()
            << "\n";
    }
    write_text(out / "ablation.csv", csv.str());
    log << "[ablate] wrote " << (out / "ablation.csv").string() << "\n";
    return 0;
}

int run_verify_bon(const ExperimentConfig& cfg, std::ostream& log) {
    validate_experiment_config(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    const BonVerifyOptions opt = bon_options_from(cfg);
    const std::vector<SuiteResult> suites = run_bon_suites(opt);

    bool all_pass = true;
    json j;
    j["n_list"] = opt.n_list;
    j["draws"] = opt.draws;
    j["suites"] = json::array();
    std::ostringstream csv;
    csv << "suite,check,measured,tolerance,pass\n";
    for (const SuiteResult& suite : suites) {
        all_pass = all_pass && suite.pass;
        json js;
        js["name"] = suite.name;
        js["pass"] = suite.pass;
        js["checks"] = json::array();
        for (const SuiteCheck& check : suite.checks) {
            js["checks"].push_back(json{{"name", check.name},
                                        {"measured", check.measured},
                                        {"tolerance", check.tolerance},
                                        {"pass", check.pass}});
            csv << suite.name << "," << check.name << "," << json(check.measured).dump() << ","
                << json(check.tolerance).dump() << "," << (check.pass ? "1" : "0") << "\n";
        }
        j["suites"].push_back(js);
        log << "[verify-bon] " << (suite.pass ? "PASS " : "FAIL ") << suite.name << " ("
            << suite.checks.size() << " checks)\n";
    }
    json kl_table = json::array();
    for (int n : opt.n_list) {
        kl_table.push_back(json{{"n", n}, {"kl_bon", kl_bon(n)}});
    }
    j["kl_table"] = kl_table;
    j["all_pass"] = all_pass;
    write_text(out / "verify_bon.json", j.dump(2) + "\n");
    write_text(out / "bon_summary.csv", csv.str());
    log << "[verify-bon] " << (all_pass ? "all suites passed" : "SUITE FAILURES") << " -> "
        << (out / "verify_bon.json").string() << "\n";
    return all_pass ? 0 : 2;
}

int run_plot(const std::vector<std::string>& metrics_files, const std::string& out_dir,
             std::ostream& log) {
    if (metrics_files.empty()) {
        throw std::invalid_argument("plot: at least one metrics file is required");
    }
    const fs::path out(out_dir);
    fs::create_directories(out);

    std::ostringstream combined;
    combined << "run_id,iteration,greedy_success\n";
    int used = 0;
    for (const std::string& file : metrics_files) {
        std::ifstream in(file);
        if (!in) {
            log << "[plot] warning: cannot read " << file << ", skipping\n";
            continue;
        }
        std::string run_id = fs::path(file).parent_path().filename().string();
        std::vector<std::pair<int, double>> points;
        std::string line;
        bool bad = false;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            json record = json::parse(line, nullptr, false);
            if (record.is_discarded() || !record.contains("iteration") ||
                !record.contains("greedy_success")) {
                log << "[plot] warning: " << file << " line " << line_no
                    << " is not a metrics record, skipping file\n";
                bad = true;
                break;
            }
            if (record.contains("run_id")) {
                run_id = record["run_id"].get<std::string>();
            }
            points.emplace_back(record["iteration"].get<int>(),
                                record["greedy_success"].get<double>());
        }
        if (bad || points.empty()) {
            if (points.empty() && !bad) {
                log << "[plot] warning: " << file << " holds no records, skipping\n";
            }
            continue;
        }
        std::ofstream curve(out / ("curve_" + run_id + ".csv"));
        curve << "iteration,greedy_success\n";
        for (const auto& [iter, success] : points) {
            curve << iter << "," << json(success).dump() << "\n";
            combined << run_id << "," << iter << "," << json(success).dump() << "\n";
        }
        ++used;
    }
    write_text(out / "curves_combined.csv", combined.str());
    log << "[plot] extracted " << used << " curve(s) -> " << out_dir << "\n";
    return 0;
}

int run_rft(const ExperimentConfig& cfg, std::ostream& log) {
    validate_experiment_config(cfg);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    const std::vector<Question> bank = question_bank(cfg.env, cfg.bank_count, cfg.bank_seed);
    write_bank_csv((out / "bank.csv").string(), bank);
    const PolicyTable base = make_uniform_policy(cfg.env.alphabet);
    const double before = greedy_success(base, cfg.env, bank);
    const RftResult rft = rft_init(base, cfg.env, bank, cfg.train.rft_samples,
                                   cfg.train.rft_bc_steps, cfg.train.rft_lr, cfg.train.seed);
    const double after = greedy_success(rft.policy, cfg.env, bank);

    save_policy((out / "policy_rft.txt").string(), rft.policy);
    json summary;
    summary["positives"] = rft.kept.size();
    summary["no_positives_warning"] = rft.no_positives_warning;
    summary["greedy_before"] = before;
    summary["greedy_after"] = after;
    summary["config"] = config_to_json(cfg);
    write_text(out / "rft_summary.json", summary.dump(2) + "\n");
    log << "[rft] " << rft.kept.size() << " positives, greedy " << before << " -> " << after
        << (rft.no_positives_warning ? " (warning: no positives)" : "") << "\n";
    return 0;
}

int run_heatmap(const ExperimentConfig& cfg, const std::string& run_dir, std::ostream& log) {
    validate_experiment_config(cfg);
    const fs::path dir(run_dir);
    const PolicyTable policy = load_policy((dir / "policy_final.txt").string());
    const CreditTable credit = load_credit((dir / "credit_final.txt").string());

    const std::vector<Question> bank = question_bank(cfg.env, cfg.bank_count, cfg.bank_seed);
    std::vector<Trajectory> trajs;
    const std::size_t questions = std::min<std::size_t>(bank.size(), 8);
    for (std::size_t i = 0; i < questions; ++i) {
        for (int k = 0; k < 4; ++k) {
            const std::uint64_t s = derive_seed(cfg.train.seed, 0x8EA7,
                                                static_cast<std::uint64_t>(bank[i].id), k);
            trajs.push_back(sample_trajectory(policy, cfg.env, bank[i], s));
        }
    }
    const std::vector<HeatmapRow> rows = emit_token_heatmap(credit, trajs);
    write_heatmap_csv((dir / "heatmap.csv").string(), rows);
    log << "[heatmap] " << rows.size() << " rows over " << trajs.size() << " trajectories -> "
        << (dir / "heatmap.csv").string() << "\n";
    return 0;
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Outcome-reward reinforcement-learning laboratory"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string variant;
    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "Config file (key = value lines)");
    app.add_option("--out", out_dir, "Output directory override");
    app.add_option("--variant", variant, "Ablation variant name override");
    app.add_option("--seed", seed, "Training seed override")->each([&](const std::string&) {
        seed_given = true;
    });

    CLI::App* cmd_run = app.add_subcommand("run", "Train one configuration");
    CLI::App* cmd_ablate = app.add_subcommand("ablate", "Run the four-variant ladder");
    CLI::App* cmd_verify = app.add_subcommand("verify-bon", "Best-of-n verification suites");
    CLI::App* cmd_plot = app.add_subcommand("plot", "Extract curves from metrics files");
    CLI::App* cmd_rft = app.add_subcommand("rft", "Rejection-sampling initialization only");
    CLI::App* cmd_heatmap = app.add_subcommand("heatmap", "Token-score heatmap from a run");
    CLI::App* cmd_schema = app.add_subcommand("schema", "Print the config-file key reference");
    std::vector<std::string> plot_files;
    cmd_plot->add_option("files", plot_files, "metrics.jsonl files");
    for (CLI::App* sub : {cmd_run, cmd_ablate, cmd_verify, cmd_plot, cmd_rft, cmd_heatmap}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (cmd_schema->parsed()) {
        std::cout << config_schema_help();
        return 0;
    }

    try {
        ExperimentConfig cfg =
            config_path.empty() ? default_experiment_config() : load_config_file(config_path);
        if (seed_given) cfg.train.seed = seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!variant.empty()) apply_variant(cfg, variant);

        if (cmd_run->parsed()) return run_experiment(cfg, std::cout);
        if (cmd_ablate->parsed()) return run_ablation(cfg, std::cout);
        if (cmd_verify->parsed()) return run_verify_bon(cfg, std::cout);
        if (cmd_plot->parsed()) return run_plot(plot_files, cfg.out_dir, std::cout);
        if (cmd_rft->parsed()) return run_rft(cfg, std::cout);
        if (cmd_heatmap->parsed()) return run_heatmap(cfg, cfg.out_dir, std::cout);
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace orlab
