#include "carnot/pl_path.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace carnot {

void PLPath::validate() const {
    if (times.size() < 2) throw std::invalid_argument("PLPath: need at least one segment");
    if (static_cast<Eigen::Index>(times.size()) != values.rows())
        throw std::invalid_argument("PLPath: times/values size mismatch");
    if (values.cols() < 1) throw std::invalid_argument("PLPath: dimension must be >= 1");
    for (size_t j = 1; j < times.size(); ++j)
        if (!(times[j] > times[j - 1]))
            throw std::invalid_argument("PLPath: times must be strictly increasing");
    if (!values.allFinite()) throw std::invalid_argument("PLPath: non-finite values");
}

PLPath make_pl_path(std::vector<double> times, Eigen::MatrixXd values) {
    PLPath p;
    p.times = std::move(times);
    p.values = std::move(values);
    p.validate();
    return p;
}

PLPath segment_path(const Eigen::VectorXd& v) {
    PLPath p;
    p.times = {0.0, 1.0};
    p.values.setZero(2, v.size());
    p.values.row(1) = v;
    return p;
}

PLPath concat_paths(const PLPath& p, const PLPath& q) {
    p.validate();
    q.validate();
    if (p.dim() != q.dim()) throw std::invalid_argument("concat_paths: dimension mismatch");
    PLPath out;
    const int mp = static_cast<int>(p.times.size());
    const int mq = static_cast<int>(q.times.size());
    out.times.reserve(static_cast<size_t>(mp + mq - 1));
    out.values.resize(mp + mq - 1, p.dim());
    for (int j = 0; j < mp; ++j) {
        out.times.push_back(p.times[static_cast<size_t>(j)]);
        out.values.row(j) = p.values.row(j);
    }
    const double t_shift = p.times.back() - q.times.front();
    const Eigen::RowVectorXd x_shift = p.values.row(mp - 1) - q.values.row(0);
    for (int j = 1; j < mq; ++j) {
        out.times.push_back(q.times[static_cast<size_t>(j)] + t_shift);
        out.values.row(mp + j - 1) = q.values.row(j) + x_shift;
    }
    return out;
}

PLPath read_pl_path_csv(const std::string& filename) {
    std::ifstream in(filename);
    if (!in) throw std::runtime_error("cannot open path CSV: " + filename);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty path CSV: " + filename);
    int d = 0;
    {
        std::stringstream header(line);
        std::string tok;
        std::getline(header, tok, ',');
        if (tok != "t") throw std::runtime_error("path CSV must start with header t,x1,...");
        while (std::getline(header, tok, ',')) ++d;
        if (d < 1) throw std::runtime_error("path CSV has no coordinate columns");
    }
    std::vector<double> times;
    std::vector<double> flat;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string tok;
        std::getline(row, tok, ',');
        times.push_back(std::stod(tok));
        for (int c = 0; c < d; ++c) {
            if (!std::getline(row, tok, ','))
                throw std::runtime_error("path CSV row with too few columns");
            flat.push_back(std::stod(tok));
        }
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(times.size()), d);
    for (size_t r = 0; r < times.size(); ++r)
        for (int c = 0; c < d; ++c) values(static_cast<Eigen::Index>(r), c) = flat[r * static_cast<size_t>(d) + static_cast<size_t>(c)];
    return make_pl_path(std::move(times), std::move(values));
}

void write_pl_path_csv(const std::string& filename, const PLPath& p) {
    p.validate();
    std::FILE* f = std::fopen(filename.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write path CSV: " + filename);
    std::fprintf(f, "t");
    for (int c = 1; c <= p.dim(); ++c) std::fprintf(f, ",x%d", c);
    std::fprintf(f, "\n");
    for (size_t r = 0; r < p.times.size(); ++r) {
        std::fprintf(f, "%.17g", p.times[r]);
        for (int c = 0; c < p.dim(); ++c)
            std::fprintf(f, ",%.17g", p.values(static_cast<Eigen::Index>(r), c));
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

}  // namespace carnot
