#include "linefix/ods.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "linefix/nn_math.hpp"
#include "linefix/tokenize.hpp"

namespace linefix::ods {

namespace {

bool is_identifier(const std::string& token) {
    if (token.empty()) return false;
    unsigned char c0 = static_cast<unsigned char>(token[0]);
    if (!std::isalpha(c0) && c0 != '_') return false;
    for (unsigned char c : token) {
        if (!std::isalnum(c) && c != '_') return false;
    }
    return true;
}

bool is_literal(const std::string& token) {
    if (token.empty()) return false;
    unsigned char c0 = static_cast<unsigned char>(token[0]);
    if (std::isdigit(c0) || c0 == '"' || c0 == '\'') return true;
    return token == "null" || token == "nullptr" || token == "true" || token == "false" ||
           token == "None" || token == "NULL" || token == "True" || token == "False";
}

std::map<std::string, int> token_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    for (const auto& t : tokens) counts[t]++;
    return counts;
}

double multiset_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    auto ca = token_counts(a);
    auto cb = token_counts(b);
    long inter = 0;
    long uni = 0;
    for (const auto& [tok, n] : ca) {
        auto it = cb.find(tok);
        const int m = it == cb.end() ? 0 : it->second;
        inter += std::min(n, m);
        uni += std::max(n, m);
    }
    for (const auto& [tok, n] : cb) {
        if (!ca.count(tok)) uni += n;
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double token_levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return static_cast<double>(prev[m]);
}

bool has_call(const std::vector<std::string>& tokens) {
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (is_identifier(tokens[i]) && tokens[i + 1] == "(") return true;
    }
    return false;
}

bool multiset_subset(const std::map<std::string, int>& small,
                     const std::map<std::string, int>& big) {
    for (const auto& [tok, n] : small) {
        auto it = big.find(tok);
        if (it == big.end() || it->second < n) return false;
    }
    return true;
}

EditCategory pick_category(const std::vector<std::string>& buggy,
                           const std::vector<std::string>& patched) {
    const bool buggy_has_try =
        std::find(buggy.begin(), buggy.end(), "try") != buggy.end();
    const bool patched_has_try =
        std::find(patched.begin(), patched.end(), "try") != patched.end();
    if (!buggy.empty() && buggy.front() == "return") return EditCategory::ReturnExprUpdate;
    if (!buggy.empty() && buggy.front() == "if") return EditCategory::IfConditionUpdate;
    if (buggy_has_try && !patched_has_try) return EditCategory::TryRemoval;
    if (has_call(buggy) && has_call(patched) && buggy != patched) {
        return EditCategory::MethodInvocationUpdate;
    }
    auto eq = std::find(buggy.begin(), buggy.end(), "=");
    if (eq != buggy.end()) {
        auto patched_eq = std::find(patched.begin(), patched.end(), "=");
        if (patched_eq != patched.end() &&
            !std::equal(eq + 1, buggy.end(), patched_eq + 1, patched.end())) {
            return EditCategory::AssignmentUpdate;
        }
    }
    return EditCategory::Other;
}

}  // namespace

const char* edit_category_name(EditCategory c) {
    switch (c) {
        case EditCategory::ReturnExprUpdate: return "ReturnExprUpdate";
        case EditCategory::MethodInvocationUpdate: return "MethodInvocationUpdate";
        case EditCategory::AssignmentUpdate: return "AssignmentUpdate";
        case EditCategory::IfConditionUpdate: return "IfConditionUpdate";
        case EditCategory::TryRemoval: return "TryRemoval";
        case EditCategory::Other: return "Other";
    }
    return "Other";
}

std::array<double, PatchFeatures::kDimensions> PatchFeatures::to_vector() const {
    std::array<double, kDimensions> x{};
    x[static_cast<std::size_t>(edit_category)] = 1.0;
    x[6] = token_jaccard;
    x[7] = norm_edit_distance;
    x[8] = length_delta_ratio;
    x[9] = introduces_new_literal ? 1.0 : 0.0;
    x[10] = reuses_in_scope_identifier ? 1.0 : 0.0;
    x[11] = removes_code_only ? 1.0 : 0.0;
    return x;
}

PatchFeatures extract_features(const std::string& buggy_line, const std::string& patched_line,
                               const std::vector<std::string>& context,
                               const std::set<std::string>& scope_identifiers) {
    (void)context;  // reserved for layout version 2 (context-aware signals)
    const auto buggy = codeprep::tokenize(buggy_line);
    const auto patched = codeprep::tokenize(patched_line);

    PatchFeatures f;
    f.edit_category = pick_category(buggy, patched);
    f.token_jaccard = multiset_jaccard(buggy, patched);
    const std::size_t longest = std::max(buggy.size(), patched.size());
    f.norm_edit_distance =
        longest == 0 ? 0.0 : token_levenshtein(buggy, patched) / static_cast<double>(longest);
    f.length_delta_ratio =
        (static_cast<double>(patched.size()) - static_cast<double>(buggy.size())) /
        std::max<double>(static_cast<double>(buggy.size()), 1.0);

    const auto buggy_counts = token_counts(buggy);
    const auto patched_counts = token_counts(patched);
    for (const auto& t : patched) {
        if (buggy_counts.count(t)) continue;
        if (is_literal(t)) f.introduces_new_literal = true;
        if (is_identifier(t) && scope_identifiers.count(t)) f.reuses_in_scope_identifier = true;
    }
    f.removes_code_only =
        patched.size() < buggy.size() && multiset_subset(patched_counts, buggy_counts);
    return f;
}

OdsModel train_ods(const std::vector<LabeledPatch>& data, int epochs, double lr, double l2,
                   double* train_accuracy) {
    std::size_t n_correct = 0;
    std::size_t n_overfit = 0;
    for (const auto& d : data) {
        (d.label == Label::Correct ? n_correct : n_overfit)++;
    }
    if (n_correct == 0 || n_overfit == 0) {
        throw DegenerateData("training data must contain both labels");
    }

    const std::size_t n = data.size();
    const double w_correct = static_cast<double>(n) / (2.0 * static_cast<double>(n_correct));
    const double w_overfit = static_cast<double>(n) / (2.0 * static_cast<double>(n_overfit));

    std::vector<std::array<double, PatchFeatures::kDimensions>> xs;
    std::vector<double> ys;
    std::vector<double> sample_w;
    xs.reserve(n);
    for (const auto& d : data) {
        xs.push_back(d.features.to_vector());
        ys.push_back(d.label == Label::Overfitting ? 1.0 : 0.0);
        sample_w.push_back(d.label == Label::Overfitting ? w_overfit : w_correct);
    }
    double total_w = 0.0;
    for (double w : sample_w) total_w += w;

    OdsModel model;
    model.weights.assign(PatchFeatures::kDimensions, 0.0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::array<double, PatchFeatures::kDimensions> grad{};
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = model.bias;
            for (int k = 0; k < PatchFeatures::kDimensions; ++k) {
                z += model.weights[static_cast<std::size_t>(k)] * xs[i][static_cast<std::size_t>(k)];
            }
            const double err = sample_w[i] * (nn::sigmoid(z) - ys[i]);
            for (int k = 0; k < PatchFeatures::kDimensions; ++k) {
                grad[static_cast<std::size_t>(k)] += err * xs[i][static_cast<std::size_t>(k)];
            }
            grad_b += err;
        }
        for (int k = 0; k < PatchFeatures::kDimensions; ++k) {
            const auto ks = static_cast<std::size_t>(k);
            model.weights[ks] -= lr * (grad[ks] / total_w + 2.0 * l2 * model.weights[ks]);
        }
        model.bias -= lr * grad_b / total_w;
    }

    if (train_accuracy) {
        std::size_t hits = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = model.bias;
            for (int k = 0; k < PatchFeatures::kDimensions; ++k) {
                z += model.weights[static_cast<std::size_t>(k)] * xs[i][static_cast<std::size_t>(k)];
            }
            const double predicted = nn::sigmoid(z) >= model.threshold ? 1.0 : 0.0;
            if (predicted == ys[i]) ++hits;
        }
        *train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
    }
    return model;
}

std::pair<double, OdsVerdict> classify(const OdsModel& model, const PatchFeatures& features) {
    if (model.feature_layout_version != PatchFeatures::kLayoutVersion ||
        model.weights.size() != PatchFeatures::kDimensions) {
        throw LayoutMismatch("model feature layout does not match this build");
    }
    const auto x = features.to_vector();
    double z = model.bias;
    for (int k = 0; k < PatchFeatures::kDimensions; ++k) {
        z += model.weights[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
    }
    const double p = nn::sigmoid(z);
    return {p, p >= model.threshold ? OdsVerdict::Discard : OdsVerdict::Keep};
}

nlohmann::json model_to_json(const OdsModel& model) {
    return nlohmann::json{{"feature_layout_version", model.feature_layout_version},
                          {"weights", model.weights},
                          {"bias", model.bias},
                          {"threshold", model.threshold}};
}

OdsModel model_from_json(const nlohmann::json& j) {
    OdsModel model;
    model.feature_layout_version = j.at("feature_layout_version").get<int>();
    model.weights = j.at("weights").get<std::vector<double>>();
    model.bias = j.at("bias").get<double>();
    model.threshold = j.at("threshold").get<double>();
    return model;
}

void save_model(const OdsModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model: " + path.string());
    out << model_to_json(model).dump(2) << '\n';
}

OdsModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read model: " + path.string());
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

nlohmann::json labeled_patch_to_json(const LabeledPatch& patch) {
    const auto& f = patch.features;
    return nlohmann::json{
        {"features",
         {{"edit_category", edit_category_name(f.edit_category)},
          {"token_jaccard", f.token_jaccard},
          {"norm_edit_distance", f.norm_edit_distance},
          {"length_delta_ratio", f.length_delta_ratio},
          {"introduces_new_literal", f.introduces_new_literal},
          {"reuses_in_scope_identifier", f.reuses_in_scope_identifier},
          {"removes_code_only", f.removes_code_only}}},
        {"label", patch.label == Label::Correct ? "Correct" : "Overfitting"},
        {"provenance", patch.provenance == Provenance::Human ? "Human" : "Machine"}};
}

LabeledPatch labeled_patch_from_json(const nlohmann::json& j) {
    LabeledPatch patch;
    const auto& f = j.at("features");
    const std::string category = f.at("edit_category").get<std::string>();
    for (int c = 0; c <= static_cast<int>(EditCategory::Other); ++c) {
        if (category == edit_category_name(static_cast<EditCategory>(c))) {
            patch.features.edit_category = static_cast<EditCategory>(c);
        }
    }
    patch.features.token_jaccard = f.at("token_jaccard").get<double>();
    patch.features.norm_edit_distance = f.at("norm_edit_distance").get<double>();
    patch.features.length_delta_ratio = f.at("length_delta_ratio").get<double>();
    patch.features.introduces_new_literal = f.at("introduces_new_literal").get<bool>();
    patch.features.reuses_in_scope_identifier = f.at("reuses_in_scope_identifier").get<bool>();
    patch.features.removes_code_only = f.at("removes_code_only").get<bool>();
    patch.label = j.at("label").get<std::string>() == "Overfitting" ? Label::Overfitting
                                                                    : Label::Correct;
    patch.provenance = j.at("provenance").get<std::string>() == "Machine" ? Provenance::Machine
                                                                          : Provenance::Human;
    // Mined human patches are positive examples by assumption.
    if (patch.provenance == Provenance::Human && patch.label != Label::Correct) {
        throw std::invalid_argument("human-provenance patches must be labeled Correct");
    }
    return patch;
}

std::set<std::string> collect_identifiers(const std::vector<std::string>& lines) {
    std::set<std::string> out;
    for (const auto& line : lines) {
        for (const auto& t : codeprep::tokenize(line)) {
            if (is_identifier(t)) out.insert(t);
        }
    }
    return out;
}

std::vector<LabeledPatch> bootstrap_corpus(int n_per_class) {
    std::vector<LabeledPatch> corpus;
    const std::set<std::string> scope = {"count", "index", "total", "buffer", "result", "size"};
    const char* scope_names[] = {"count", "index", "total", "buffer", "result", "size"};
    const char* heads[] = {"return", "if (", "x = ", "log(", "emit(", "check("};

    for (int i = 0; i < n_per_class; ++i) {
        // Correct-looking: replace one identifier with another already in
        // scope; the line shape survives.
        const std::string from = scope_names[i % 6];
        const std::string to = scope_names[(i + 1) % 6];
        const std::string head = heads[i % 6];
        const std::string tail = (i % 2 == 0) ? " + offset);" : ");";
        LabeledPatch good;
        good.features = extract_features(head + from + tail, head + to + tail, {}, scope);
        good.label = Label::Correct;
        good.provenance = Provenance::Human;
        corpus.push_back(good);

        // Overfitting-looking: the expression collapses into a constant or
        // disappears entirely.
        const std::string buggy = head + from + tail;
        const std::string junk = (i % 3 == 0)   ? "return null;"
                                 : (i % 3 == 1) ? "return 0;"
                                                : ";";
        LabeledPatch bad;
        bad.features = extract_features(buggy, junk, {}, scope);
        bad.label = Label::Overfitting;
        bad.provenance = Provenance::Machine;
        corpus.push_back(bad);
    }
    return corpus;
}

OdsModel bootstrap_model() {
    return train_ods(bootstrap_corpus(20), 2000, 0.5, 1e-4);
}

}  // namespace linefix::ods
