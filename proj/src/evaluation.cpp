#include "nids/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nids/common.hpp"

namespace nids {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* who) {
    if (a != b)
        throw ShapeError(std::string(who) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

Ratio ratio(double num, double den) { return den > 0 ? Ratio{num / den, false} : Ratio{0.0, true}; }

void require_both_classes(std::span<const std::uint8_t> labels, const char* who) {
    std::size_t pos = 0;
    for (auto y : labels) pos += y != 0;
    if (pos == 0 || pos == labels.size())
        throw Error(std::string(who) + ": labels contain a single class");
}

// Rows sorted by probability, descending.
std::vector<std::size_t> by_score_desc(std::span<const double> probs) {
    std::vector<std::size_t> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
    return idx;
}

}  // namespace

ConfusionMatrix confusion(std::span<const std::uint8_t> decisions, std::span<const std::uint8_t> labels) {
    require_same_length(decisions.size(), labels.size(), "confusion");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool d = decisions[i] != 0, y = labels[i] != 0;
        if (d && y) ++cm.tp;
        else if (d) ++cm.fp;
        else if (y) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Ratio precision(const ConfusionMatrix& cm) { return ratio(double(cm.tp), double(cm.tp + cm.fp)); }
Ratio recall(const ConfusionMatrix& cm) { return ratio(double(cm.tp), double(cm.tp + cm.fn)); }
Ratio accuracy(const ConfusionMatrix& cm) { return ratio(double(cm.tp + cm.tn), double(cm.total())); }

Ratio f1(const ConfusionMatrix& cm) {
    const Ratio p = precision(cm), r = recall(cm);
    if (p.value + r.value <= 0) return {0.0, true};
    return {2 * p.value * r.value / (p.value + r.value), p.degenerate || r.degenerate};
}

std::vector<std::uint8_t> apply_threshold(std::span<const double> probs, double threshold) {
    std::vector<std::uint8_t> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
    return out;
}

RocResult roc_auc(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    require_same_length(probs.size(), labels.size(), "roc_auc");
    require_both_classes(labels, "roc_auc");
    double P = 0, N = 0;
    for (auto y : labels) (y ? P : N) += 1;
    const auto idx = by_score_desc(probs);
    RocResult r;
    r.curve.push_back({0.0, 0.0, INFINITY});
    double tp = 0, fp = 0, area = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double t = probs[idx[i]];
        const double tp0 = tp, fp0 = fp;
        for (; i < idx.size() && probs[idx[i]] == t; ++i) (labels[idx[i]] ? tp : fp) += 1;
        area += (fp - fp0) * (tp + tp0) / 2;
        r.curve.push_back({fp / N, tp / P, t});
    }
    r.auc = area / (P * N);
    return r;
}

std::vector<PrPoint> pr_curve(std::span<const double> probs, std::span<const std::uint8_t> labels) {
    require_same_length(probs.size(), labels.size(), "pr_curve");
    require_both_classes(labels, "pr_curve");
    double P = 0;
    for (auto y : labels) P += y != 0;
    const auto idx = by_score_desc(probs);
    std::vector<PrPoint> out;
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < idx.size();) {
        const double t = probs[idx[i]];
        for (; i < idx.size() && probs[idx[i]] == t; ++i) (labels[idx[i]] ? tp : fp) += 1;
        out.push_back({tp / P, tp / (tp + fp), t});
    }
    std::reverse(out.begin(), out.end());
    return out;
}

ClassificationReport classification_report(std::span<const std::uint8_t> decisions,
                                           std::span<const std::uint8_t> labels) {
    const auto cm = confusion(decisions, labels);
    const ConfusionMatrix flipped{cm.tn, cm.fn, cm.tp, cm.fp};
    ClassificationReport r;
    r.classes[1] = {precision(cm), recall(cm), f1(cm), cm.tp + cm.fn};
    r.classes[0] = {precision(flipped), recall(flipped), f1(flipped), cm.tn + cm.fp};
    r.accuracy = accuracy(cm);
    return r;
}

EvaluationReport evaluate(std::span<const double> probs, std::span<const std::uint8_t> labels, double threshold,
                          std::string model, std::string dataset, std::uint64_t model_digest) {
    require_same_length(probs.size(), labels.size(), "evaluate");
    EvaluationReport r;
    r.model = std::move(model);
    r.dataset = std::move(dataset);
    r.model_digest = model_digest;
    r.threshold = threshold;
    const auto d = apply_threshold(probs, threshold);
    r.confusion = confusion(d, labels);
    r.accuracy = accuracy(r.confusion);
    r.precision = precision(r.confusion);
    r.recall = recall(r.confusion);
    r.f1 = f1(r.confusion);
    r.per_class = classification_report(d, labels);
    const auto pos = r.confusion.positives();
    if (pos > 0 && pos < labels.size()) {
        auto roc = roc_auc(probs, labels);
        r.roc_auc = roc.auc;
        r.roc_curve = std::move(roc.curve);
        r.roc_defined = true;
    }
    return r;
}

std::string percent(double ratio) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", ratio * 100.0);
    return buf;
}

namespace {

std::string flagged(const Ratio& r) { return percent(r.value) + (r.degenerate ? " (undefined: zero denominator)" : ""); }

std::string pad(std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
}

}  // namespace

std::string format_report_text(const EvaluationReport& r) {
    std::string out;
    out += "Model: " + r.model + "    Dataset: " + r.dataset + "    Samples: " + std::to_string(r.confusion.total()) +
           "\n";
    char thr[64];
    std::snprintf(thr, sizeof thr, "%.4f", r.threshold);
    out += "Decision threshold: " + std::string(thr) + "\n\n";
    out += pad("Metric", 12) + "Value\n";
    out += pad("Accuracy", 12) + flagged(r.accuracy) + "\n";
    out += pad("Precision", 12) + flagged(r.precision) + "\n";
    out += pad("Recall", 12) + flagged(r.recall) + "\n";
    out += pad("F1-Score", 12) + flagged(r.f1) + "\n";
    out += pad("ROC-AUC", 12);
    if (r.roc_defined) {
        char auc[32];
        std::snprintf(auc, sizeof auc, "%.4f", r.roc_auc);
        out += auc;
    } else {
        out += "undefined (single class)";
    }
    out += "\n\nConfusion matrix\n";
    out += pad("", 12) + pad("Pred 0", 12) + "Pred 1\n";
    out += pad("Actual 0", 12) + pad(std::to_string(r.confusion.tn), 12) + std::to_string(r.confusion.fp) + "\n";
    out += pad("Actual 1", 12) + pad(std::to_string(r.confusion.fn), 12) + std::to_string(r.confusion.tp) + "\n";
    out += "\nClassification report\n";
    out += pad("Class", 10) + pad("Precision", 12) + pad("Recall", 12) + pad("F1-Score", 12) + "Support\n";
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& m = r.per_class.classes[c];
        out += pad(c ? "1" : "0", 10) + pad(percent(m.precision.value), 12) + pad(percent(m.recall.value), 12) +
               pad(percent(m.f1.value), 12) + std::to_string(m.support) + "\n";
    }
    return out;
}

std::string format_report_kv(const EvaluationReport& r) {
    std::string out;
    const auto kv = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    const auto ratio_kv = [&](const std::string& k, const Ratio& v) {
        kv(k, format_double(v.value));
        kv(k + ".degenerate", v.degenerate ? "true" : "false");
    };
    kv("report.version", "1");
    kv("model", r.model);
    kv("dataset", r.dataset);
    kv("model_digest", hex64(r.model_digest));
    kv("threshold", format_double(r.threshold));
    kv("samples", std::to_string(r.confusion.total()));
    kv("tp", std::to_string(r.confusion.tp));
    kv("fp", std::to_string(r.confusion.fp));
    kv("tn", std::to_string(r.confusion.tn));
    kv("fn", std::to_string(r.confusion.fn));
    ratio_kv("accuracy", r.accuracy);
    ratio_kv("precision", r.precision);
    ratio_kv("recall", r.recall);
    ratio_kv("f1", r.f1);
    kv("roc_auc", r.roc_defined ? format_double(r.roc_auc) : "undefined");
    for (std::size_t c = 0; c < 2; ++c) {
        const auto& m = r.per_class.classes[c];
        const std::string p = "class" + std::to_string(c) + ".";
        kv(p + "precision", format_double(m.precision.value));
        kv(p + "recall", format_double(m.recall.value));
        kv(p + "f1", format_double(m.f1.value));
        kv(p + "support", std::to_string(m.support));
    }
    return out;
}

std::string format_confusion_grid(const EvaluationReport& r) {
    return "actual,predicted_0,predicted_1\n0," + std::to_string(r.confusion.tn) + "," + std::to_string(r.confusion.fp) +
           "\n1," + std::to_string(r.confusion.fn) + "," + std::to_string(r.confusion.tp) + "\n";
}

std::string format_roc_curve(const EvaluationReport& r) {
    std::string out = "fpr,tpr,threshold\n";
    for (const auto& p : r.roc_curve)
        out += format_double(p.fpr) + "," + format_double(p.tpr) + "," +
               (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) + "\n";
    return out;
}

}  // namespace nids
