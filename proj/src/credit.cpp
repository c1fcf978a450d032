#include "orlab/credit.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "orlab/mathutil.hpp"

namespace orlab {

std::vector<double> token_scores(const CreditTable& credit, const Trajectory& traj) {
    if (traj.post_contexts.size() != traj.tokens.size()) {
        throw std::invalid_argument("token_scores: trajectory post-contexts out of sync");
    }
    std::vector<double> out;
    out.reserve(traj.post_contexts.size());
    for (ContextKey ctx : traj.post_contexts) {
        const auto it = credit.scores.find(ctx);
        out.push_back(it == credit.scores.end() ? 0.0 : it->second);
    }
    return out;
}

double sequence_success_prob(const CreditTable& credit, const Trajectory& traj) {
    const auto scores = token_scores(credit, traj);
    if (scores.empty()) {
        throw std::invalid_argument("sequence_success_prob: empty trajectory");
    }
    double mean = 0.0;
    for (double w : scores) {
        mean += w;
    }
    mean /= static_cast<double>(scores.size());
    return sigmoid(mean);
}

CeResult ce_loss_and_grad(const CreditTable& credit, const Trajectory& traj, int reward) {
    if (reward != 0 && reward != 1) {
        throw std::invalid_argument("ce_loss_and_grad: reward must be binary");
    }
    const auto scores = token_scores(credit, traj);
    if (scores.empty()) {
        throw std::invalid_argument("ce_loss_and_grad: empty trajectory");
    }
    double mean = 0.0;
    for (double w : scores) {
        mean += w;
    }
    const double t = static_cast<double>(scores.size());
    mean /= t;

    CeResult res;
    // -log p for successes, -log(1-p) for failures, in overflow-safe form.
    res.loss = reward == 1 ? -log_sigmoid(mean) : -log_sigmoid(-mean);
    const double per_step = (sigmoid(mean) - static_cast<double>(reward)) / t;
    for (ContextKey ctx : traj.post_contexts) {
        res.grad[ctx] += per_step;
    }
    return res;
}

TokenWeights omega_weights(const std::vector<double>& scores) {
    TokenWeights w;
    w.omega_plus.reserve(scores.size());
    w.omega_minus.reserve(scores.size());
    for (double s : scores) {
        // 2*sigmoid(s) - 1 == tanh(s/2); the odd-symmetric form keeps
        // omega_plus(s) and omega_minus(-s) bit-identical.
        const double th = std::tanh(0.5 * s);
        w.omega_plus.push_back(std::max(th, 0.0));
        w.omega_minus.push_back(std::max(-th, 0.0));
    }
    return w;
}

void credit_update(CreditTable& credit, const std::vector<Trajectory>& batch, double lr) {
    if (!(lr > 0.0)) {
        throw std::invalid_argument("credit_update: learning rate must be positive");
    }
    if (batch.empty()) {
        return;
    }
    CreditGrad total;
    for (const auto& traj : batch) {
        const auto res = ce_loss_and_grad(credit, traj, traj.reward);
        for (const auto& [ctx, g] : res.grad) {
            total[ctx] += g;
        }
    }
    const double scale = lr / static_cast<double>(batch.size());
    for (const auto& [ctx, g] : total) {
        credit.scores[ctx] -= scale * g;
    }
}

std::vector<HeatmapRow> emit_token_heatmap(const CreditTable& credit,
                                           const std::vector<Trajectory>& trajectories) {
    std::vector<HeatmapRow> rows;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& traj = trajectories[i];
        const auto scores = token_scores(credit, traj);
        for (std::size_t t = 0; t < scores.size(); ++t) {
            HeatmapRow row;
            row.traj_id = static_cast<int>(i);
            row.step = static_cast<int>(t);
            row.token = traj.tokens[t];
            row.w = scores[t];
            row.score01 = sigmoid(scores[t]);
            rows.push_back(row);
        }
    }
    return rows;
}

void write_heatmap_csv(const std::string& path, const std::vector<HeatmapRow>& rows) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_heatmap_csv: cannot open " + path);
    }
    out << "traj_id,step,token,w,score01\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g", row.w, row.score01);
        out << row.traj_id << ',' << row.step << ',' << row.token << ',' << buf << '\n';
    }
}

namespace {
constexpr const char* kCreditMagic = "orlab-credit-v1";
}

void save_credit(const std::string& path, const CreditTable& credit) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_credit: cannot open " + path);
    }
    std::vector<std::pair<ContextKey, double>> sorted(credit.scores.begin(), credit.scores.end());
    std::sort(sorted.begin(), sorted.end());
    out << kCreditMagic << "\n";
    out << "rows " << sorted.size() << "\n";
    char buf[64];
    for (const auto& [ctx, w] : sorted) {
        std::snprintf(buf, sizeof(buf), "%016" PRIx64 " %a", ctx, w);
        out << buf << "\n";
    }
    if (!out) {
        throw std::runtime_error("save_credit: write failed for " + path);
    }
}

CreditTable load_credit(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_credit: cannot open " + path);
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != kCreditMagic) {
        throw std::runtime_error("load_credit: unrecognized header in " + path);
    }
    std::string word;
    std::size_t rows = 0;
    if (!(in >> word) || word != "rows" || !(in >> rows)) {
        throw std::runtime_error("load_credit: malformed header in " + path);
    }
    CreditTable credit;
    for (std::size_t i = 0; i < rows; ++i) {
        std::string keyhex, value;
        if (!(in >> keyhex >> value)) {
            throw std::runtime_error("load_credit: truncated table in " + path);
        }
        ContextKey ctx = 0;
        if (std::sscanf(keyhex.c_str(), "%" SCNx64, &ctx) != 1) {
            throw std::runtime_error("load_credit: bad context key in " + path);
        }
        char* end = nullptr;
        const double w = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0') {
            throw std::runtime_error("load_credit: bad score value in " + path);
        }
        credit.scores.emplace(ctx, w);
    }
    return credit;
}

}  // namespace orlab
