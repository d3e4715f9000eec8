#include "ae/harness.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "ae/config.hpp"
#include "ae/rng.hpp"

namespace ae {

namespace {

Tensor mat_to_tensor(const cv::Mat& bgr, int R) {
    cv::Mat resized;
    if (bgr.rows == R && bgr.cols == R)
        resized = bgr;
    else
        cv::resize(bgr, resized, cv::Size(R, R), 0, 0, cv::INTER_LINEAR);
    Tensor t({3, R, R});
    for (int i = 0; i < R; ++i) {
        const cv::Vec3b* row = resized.ptr<cv::Vec3b>(i);
        for (int j = 0; j < R; ++j)
            for (int c = 0; c < 3; ++c)  // BGR -> RGB planes
                t.data[(size_t(c) * R + i) * R + j] = real(row[j][2 - c] / 127.5 - 1.0);
    }
    return t;
}

cv::Mat tensor_to_mat(const Tensor& img) {
    const int H = img.dim(1), W = img.dim(2);
    cv::Mat bgr(H, W, CV_8UC3);
    for (int i = 0; i < H; ++i) {
        cv::Vec3b* row = bgr.ptr<cv::Vec3b>(i);
        for (int j = 0; j < W; ++j)
            for (int c = 0; c < 3; ++c) {
                double v = (double(img.data[(size_t(c) * H + i) * W + j]) + 1.0) * 127.5;
                row[j][2 - c] = uchar(std::lround(std::min(255.0, std::max(0.0, v))));
            }
    }
    return bgr;
}

}  // namespace

Dataset load_dataset(const std::string& path, int resolution) {
    if (!std::filesystem::is_directory(path))
        throw ConfigError("load_dataset: '" + path + "' is not a directory");
    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("load_dataset: '" + path + "' is empty");

    Dataset ds;
    for (const auto& f : files) {
        cv::Mat img = cv::imread(f, cv::IMREAD_COLOR);
        if (img.empty()) {
            std::cerr << "warning: skipping undecodable file " << f << "\n";
            continue;
        }
        ds.images.push_back(mat_to_tensor(img, resolution));
        ds.names.push_back(std::filesystem::path(f).filename().string());
    }
    if (ds.images.empty())
        throw ConfigError("load_dataset: no decodable images in '" + path + "'");
    return ds;
}

SynthKind synth_kind_from_string(const std::string& s) {
    if (s == "shapes") return SynthKind::Shapes;
    if (s == "textures") return SynthKind::Textures;
    if (s == "checkers") return SynthKind::Checkers;
    throw ConfigError("unknown synthetic dataset kind '" + s + "' (shapes|textures|checkers)");
}

std::string to_string(SynthKind k) {
    switch (k) {
        case SynthKind::Shapes: return "shapes";
        case SynthKind::Textures: return "textures";
        case SynthKind::Checkers: return "checkers";
    }
    return "?";
}

namespace {

cv::Scalar random_color(Rng& rng) {
    return cv::Scalar(rng.uniform(0, 255), rng.uniform(0, 255), rng.uniform(0, 255));
}

Tensor synth_shapes(int R, Rng& rng) {
    cv::Mat canvas(R, R, CV_8UC3, random_color(rng));
    const int n = 3 + rng.uniform_int(4);
    for (int k = 0; k < n; ++k) {
        cv::Scalar color = random_color(rng);
        if (rng.uniform_int(2) == 0) {
            cv::circle(canvas, {rng.uniform_int(R), rng.uniform_int(R)},
                       std::max(2, rng.uniform_int(R / 3)), color, cv::FILLED, cv::LINE_8);
        } else {
            std::vector<cv::Point> pts;
            for (int v = 0; v < 3 + rng.uniform_int(3); ++v)
                pts.push_back({rng.uniform_int(R), rng.uniform_int(R)});
            cv::fillConvexPoly(canvas, pts, color, cv::LINE_8);
        }
    }
    return mat_to_tensor(canvas, R);
}

// value noise: one bilinearly upsampled luminance field summed over octaves,
// mapped through a random two-color palette
Tensor synth_textures(int R, Rng& rng) {
    double ca[3], cb[3];
    for (int c = 0; c < 3; ++c) {
        ca[c] = rng.uniform(-1, 1);
        cb[c] = rng.uniform(-1, 1);
    }
    std::vector<double> lum(size_t(R) * R, 0.0);
    double amp = 1.0;
    for (int cell = R / 4; cell >= 2; cell /= 2, amp *= 0.55) {
        const int G = R / cell + 1;
        std::vector<double> grid(size_t(G) * G);
        for (auto& g : grid) g = rng.uniform(-1, 1);
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < R; ++j) {
                double y = double(i) / cell, x = double(j) / cell;
                int y0 = int(y), x0 = int(x);
                double fy = y - y0, fx = x - x0;
                double v00 = grid[size_t(y0) * G + x0];
                double v01 = grid[size_t(y0) * G + x0 + 1];
                double v10 = grid[size_t(y0 + 1) * G + x0];
                double v11 = grid[size_t(y0 + 1) * G + x0 + 1];
                lum[size_t(i) * R + j] += amp * ((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                                                 fy * ((1 - fx) * v10 + fx * v11));
            }
    }
    Tensor img({3, R, R});
    for (int i = 0; i < R * R; ++i) {
        double t = 0.5 * (std::tanh(lum[size_t(i)]) + 1.0);
        for (int c = 0; c < 3; ++c)
            img.data[size_t(c) * R * R + i] = real(ca[c] + (cb[c] - ca[c]) * t);
    }
    return img;
}

Tensor synth_checkers(int R, Rng& rng) {
    const int cells[] = {4, 8, 16};
    const int cell = cells[rng.uniform_int(3)];
    const int oy = rng.uniform_int(cell), ox = rng.uniform_int(cell);
    double ca[3], cb[3];
    for (int c = 0; c < 3; ++c) {
        ca[c] = rng.uniform(-1, 1);
        cb[c] = rng.uniform(-1, 1);
    }
    Tensor img({3, R, R});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < R; ++i)
            for (int j = 0; j < R; ++j) {
                bool a = (((i + oy) / cell) + ((j + ox) / cell)) % 2 == 0;
                img.data[(size_t(c) * R + i) * R + j] = real(a ? ca[c] : cb[c]);
            }
    return img;
}

}  // namespace

Dataset synth_dataset(SynthKind kind, int n, int resolution, uint64_t seed) {
    if (n < 1) throw ConfigError("synth_dataset: n must be >= 1");
    if (!is_pow2(resolution) || resolution < 8)
        throw ConfigError("synth_dataset: resolution must be a power of two >= 8");
    Dataset ds;
    for (int i = 0; i < n; ++i) {
        Rng rng(seed, 0x73796e7468ULL + uint64_t(int(kind)) * 0x10000ULL + uint64_t(i));
        switch (kind) {
            case SynthKind::Shapes: ds.images.push_back(synth_shapes(resolution, rng)); break;
            case SynthKind::Textures: ds.images.push_back(synth_textures(resolution, rng)); break;
            case SynthKind::Checkers: ds.images.push_back(synth_checkers(resolution, rng)); break;
        }
        ds.names.push_back(to_string(kind) + "_" + std::to_string(i));
    }
    return ds;
}

void save_image(const std::string& path, const Tensor& img) {
    if (img.shape.size() != 3 || img.dim(0) != 3)
        throw ShapeError("save_image: expected [3,H,W], got " + shape_str(img.shape));
    if (!cv::imwrite(path, tensor_to_mat(img)))
        throw std::runtime_error("save_image: failed to write " + path);
}

void save_gray_image(const std::string& path, const Tensor& map) {
    if (map.shape.size() != 2)
        throw ShapeError("save_gray_image: expected [h,w], got " + shape_str(map.shape));
    const int H = map.dim(0), W = map.dim(1);
    cv::Mat gray(H, W, CV_8UC1);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < W; ++j) {
            double v = double(map.data[size_t(i) * W + j]) * 255.0;
            gray.at<uchar>(i, j) = uchar(std::lround(std::min(255.0, std::max(0.0, v))));
        }
    if (!cv::imwrite(path, gray))
        throw std::runtime_error("save_gray_image: failed to write " + path);
}

Tensor load_image(const std::string& path, int resolution) {
    cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("load_image: cannot decode " + path);
    return mat_to_tensor(img, resolution);
}

}  // namespace ae
