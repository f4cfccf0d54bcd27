#include "ovepg/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ovepg/rng.hpp"

namespace ovepg {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        cells.push_back(cell);
    }
    return cells;
}

struct RawTable {
    std::vector<std::vector<double>> features;
    std::vector<std::string> labels;
};

RawTable read_feature_label_csv(const std::string& path, int expected_features) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("malformed dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("malformed dataset: empty file " + path);

    RawTable table;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (expected_features > 0 && static_cast<int>(cells.size()) != expected_features + 1)
            throw std::runtime_error("malformed dataset: wrong column count at row " + std::to_string(row));
        if (cells.size() < 2)
            throw std::runtime_error("malformed dataset: too few columns at row " + std::to_string(row));
        std::vector<double> feats(cells.size() - 1);
        for (std::size_t j = 0; j + 1 < cells.size(); ++j) {
            try {
                feats[j] = std::stod(cells[j]);
            } catch (const std::exception&) {
                throw std::runtime_error("malformed dataset: non-numeric feature at row " + std::to_string(row));
            }
            if (!std::isfinite(feats[j]))
                throw std::runtime_error("malformed dataset: non-finite feature at row " + std::to_string(row));
        }
        if (!table.features.empty() && feats.size() != table.features.front().size())
            throw std::runtime_error("malformed dataset: ragged row " + std::to_string(row));
        table.features.push_back(std::move(feats));
        table.labels.push_back(cells.back());
    }
    if (table.features.empty()) throw std::runtime_error("malformed dataset: no data rows in " + path);
    return table;
}

LabeledDesignMatrix table_to_data(const RawTable& table, int keep_features) {
    // Alphabetical class order fixes the one-hot mapping.
    std::map<std::string, int> class_ids;
    for (const auto& name : table.labels) class_ids.emplace(name, 0);
    int next = 0;
    std::vector<std::string> names;
    for (auto& [name, id] : class_ids) {
        id = next++;
        names.push_back(name);
    }

    const int n = static_cast<int>(table.features.size());
    const int d_all = static_cast<int>(table.features.front().size());
    const int d = keep_features > 0 ? keep_features : d_all;
    MatrixXd X(n, d);
    std::vector<int> classes(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) X(i, j) = table.features[i][j];
        classes[i] = class_ids.at(table.labels[i]);
    }
    return LabeledDesignMatrix(std::move(X), OneHotLabels(std::move(classes), next), std::move(names));
}

}  // namespace

LabeledDesignMatrix::LabeledDesignMatrix(MatrixXd X_, OneHotLabels labels_,
                                         std::vector<std::string> class_names_)
    : X(std::move(X_)), labels(std::move(labels_)), class_names(std::move(class_names_)) {
    if (labels.n() != n()) throw std::invalid_argument("label count must match row count");
    if (n() < num_classes()) throw std::invalid_argument("need at least one example per class");
    if (!X.allFinite()) throw std::invalid_argument("features must be finite");
    std::vector<int> counts(num_classes(), 0);
    for (int i = 0; i < n(); ++i) ++counts[labels.class_of(i)];
    for (int c = 0; c < num_classes(); ++c)
        if (counts[c] == 0)
            throw std::invalid_argument("degenerate episode: class " + std::to_string(c) + " absent");
    if (!class_names.empty() && static_cast<int>(class_names.size()) != num_classes())
        throw std::invalid_argument("class name count mismatch");
}

LabeledDesignMatrix load_labeled_csv(const std::string& path) {
    return table_to_data(read_feature_label_csv(path, -1), -1);
}

LabeledDesignMatrix load_iris_2d(const std::string& path) {
    const RawTable table = read_feature_label_csv(path, 4);
    if (table.features.size() != 150)
        throw std::runtime_error("malformed dataset: expected 150 rows, got " +
                                 std::to_string(table.features.size()));
    LabeledDesignMatrix data = table_to_data(table, 2);
    if (data.num_classes() != 3)
        throw std::runtime_error("malformed dataset: expected 3 classes, got " +
                                 std::to_string(data.num_classes()));
    return data;
}

std::vector<EpisodeTask> make_splits(const LabeledDesignMatrix& data, int per_class,
                                     int repeats, std::uint64_t seed) {
    const int c = data.num_classes();
    std::vector<std::vector<int>> by_class(c);
    for (int i = 0; i < data.n(); ++i) by_class[data.labels.class_of(i)].push_back(i);
    for (int k = 0; k < c; ++k) {
        if (per_class < 1 || per_class >= static_cast<int>(by_class[k].size()))
            throw std::invalid_argument("invalid argument: per_class must leave a nonempty query set");
    }

    std::vector<EpisodeTask> episodes;
    episodes.reserve(repeats);
    for (int r = 0; r < repeats; ++r) {
        RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(r)), 0);
        std::vector<int> sup_rows, qry_rows;
        for (int k = 0; k < c; ++k) {
            std::vector<int> rows = by_class[k];
            // Fisher-Yates on the class rows.
            for (int i = static_cast<int>(rows.size()) - 1; i > 0; --i) {
                const int j = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
                std::swap(rows[i], rows[j]);
            }
            for (int i = 0; i < static_cast<int>(rows.size()); ++i)
                (i < per_class ? sup_rows : qry_rows).push_back(rows[i]);
        }
        auto build = [&](const std::vector<int>& rows) {
            MatrixXd X(static_cast<int>(rows.size()), data.dim());
            std::vector<int> classes(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                X.row(static_cast<int>(i)) = data.X.row(rows[i]);
                classes[i] = data.labels.class_of(rows[i]);
            }
            return LabeledDesignMatrix(std::move(X), OneHotLabels(std::move(classes), c), data.class_names);
        };
        episodes.push_back(EpisodeTask{build(sup_rows), build(qry_rows)});
    }
    return episodes;
}

EpisodeTask synth_blobs(int num_classes, int per_class, int dim,
                        double separation, std::uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("synth_blobs needs at least 2 classes");
    if (per_class < 1 || dim < 1) throw std::invalid_argument("synth_blobs needs positive sizes");

    // Simplex-vertex centers: orthonormal basis vectors when they fit,
    // otherwise equally spaced directions in the first two coordinates.
    MatrixXd centers = MatrixXd::Zero(num_classes, dim);
    for (int c = 0; c < num_classes; ++c) {
        if (num_classes <= dim) {
            centers(c, c) = separation;
        } else if (dim >= 2) {
            const double angle = 2.0 * 3.14159265358979323846 * c / num_classes;
            centers(c, 0) = separation * std::cos(angle);
            centers(c, 1) = separation * std::sin(angle);
        } else {
            centers(c, 0) = separation * (c - 0.5 * (num_classes - 1));
        }
    }

    auto draw_set = [&](std::uint64_t stream) {
        RngStream rng(seed, stream);
        MatrixXd X(num_classes * per_class, dim);
        std::vector<int> classes(num_classes * per_class);
        int row = 0;
        for (int c = 0; c < num_classes; ++c) {
            for (int i = 0; i < per_class; ++i, ++row) {
                for (int j = 0; j < dim; ++j) X(row, j) = centers(c, j) + rng.normal();
                classes[row] = c;
            }
        }
        std::vector<std::string> names;
        for (int c = 0; c < num_classes; ++c) names.push_back("class" + std::to_string(c));
        return LabeledDesignMatrix(std::move(X), OneHotLabels(std::move(classes), num_classes), std::move(names));
    };
    return EpisodeTask{draw_set(0), draw_set(1)};
}

LabeledDesignMatrix merge(const LabeledDesignMatrix& a, const LabeledDesignMatrix& b) {
    if (a.num_classes() != b.num_classes() || a.dim() != b.dim())
        throw std::invalid_argument("cannot merge datasets with different shapes");
    MatrixXd X(a.n() + b.n(), a.dim());
    X.topRows(a.n()) = a.X;
    X.bottomRows(b.n()) = b.X;
    std::vector<int> classes;
    classes.reserve(a.n() + b.n());
    for (int i = 0; i < a.n(); ++i) classes.push_back(a.labels.class_of(i));
    for (int i = 0; i < b.n(); ++i) classes.push_back(b.labels.class_of(i));
    return LabeledDesignMatrix(std::move(X), OneHotLabels(std::move(classes), a.num_classes()), a.class_names);
}

}  // namespace ovepg
