#pragma once

#include <map>
#include <string>
#include <vector>

#include "mmgr/error.hpp"

namespace mmgr {

struct Prediction {
    std::string id;
    int truth;
    int predicted;
};

struct PredictionSet {
    std::vector<Prediction> items;
    int class_count = 0;

    void check() const {
        std::map<std::string, int> seen;
        for (const auto& p : items) {
            if (p.truth < 0 || p.truth >= class_count || p.predicted < 0 ||
                p.predicted >= class_count)
                throw ParameterError("prediction set: label out of range for sample '" + p.id +
                                     "'");
            if (++seen[p.id] > 1)
                throw ParameterError("prediction set: duplicate sample id '" + p.id + "'");
        }
    }
};

inline double accuracy(const PredictionSet& p) {
    if (p.items.empty()) throw ParameterError("accuracy: empty prediction set");
    std::size_t correct = 0;
    for (const auto& it : p.items)
        if (it.truth == it.predicted) ++correct;
    return (double)correct / (double)p.items.size();
}

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<long> counts;  // row-major l x l

    explicit ConfusionMatrix(int l = 0) : classes(l), counts((std::size_t)(l * l), 0) {}

    long& at(int truth, int pred) { return counts[(std::size_t)(truth * classes + pred)]; }
    long at(int truth, int pred) const { return counts[(std::size_t)(truth * classes + pred)]; }

    long total() const {
        long t = 0;
        for (long c : counts) t += c;
        return t;
    }

    long trace() const {
        long t = 0;
        for (int i = 0; i < classes; ++i) t += at(i, i);
        return t;
    }

    // Rows scaled to sum to 1; all-zero rows stay zero.
    std::vector<double> row_normalized() const {
        std::vector<double> out((std::size_t)(classes * classes), 0.0);
        for (int t = 0; t < classes; ++t) {
            long row = 0;
            for (int p = 0; p < classes; ++p) row += at(t, p);
            if (row == 0) continue;
            for (int p = 0; p < classes; ++p)
                out[(std::size_t)(t * classes + p)] = (double)at(t, p) / (double)row;
        }
        return out;
    }
};

inline ConfusionMatrix confusion(const PredictionSet& p) {
    if (p.items.empty()) throw ParameterError("confusion: empty prediction set");
    ConfusionMatrix m(p.class_count);
    for (const auto& it : p.items) ++m.at(it.truth, it.predicted);
    return m;
}

// Fig-4 style change analysis between a base and a fused prediction set:
// per true class, "correct" counts samples the base got wrong and the fused
// run got right, "error" counts the opposite transitions.
struct ChangeCounts {
    std::vector<long> correct;
    std::vector<long> error;

    long total_correct() const {
        long s = 0;
        for (long c : correct) s += c;
        return s;
    }
    long total_error() const {
        long s = 0;
        for (long c : error) s += c;
        return s;
    }
};

inline ChangeCounts change_analysis(const PredictionSet& base, const PredictionSet& fused) {
    if (base.class_count != fused.class_count)
        throw AlignmentError("change_analysis: class count mismatch");
    std::map<std::string, const Prediction*> fused_by_id;
    for (const auto& p : fused.items) fused_by_id[p.id] = &p;
    if (fused_by_id.size() != base.items.size())
        throw AlignmentError("change_analysis: prediction sets differ in size");
    ChangeCounts out;
    out.correct.assign((std::size_t)base.class_count, 0);
    out.error.assign((std::size_t)base.class_count, 0);
    for (const auto& b : base.items) {
        auto it = fused_by_id.find(b.id);
        if (it == fused_by_id.end())
            throw AlignmentError("change_analysis: sample '" + b.id + "' missing from fused set");
        const Prediction& f = *it->second;
        if (f.truth != b.truth)
            throw AlignmentError("change_analysis: true label differs for sample '" + b.id + "'");
        const bool base_right = b.predicted == b.truth;
        const bool fused_right = f.predicted == f.truth;
        if (!base_right && fused_right) ++out.correct[(std::size_t)b.truth];
        if (base_right && !fused_right) ++out.error[(std::size_t)b.truth];
    }
    return out;
}

} // namespace mmgr
