#include "maskreg/depth_image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "maskreg/random.hpp"

namespace maskreg {

CameraModel CameraModel::isotropic(int width, int height, double focal, double sigma, double r_min) {
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.focal = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.noise = Matrix3::Identity() * (sigma * sigma);
    cam.r_min = r_min;
    cam.validate();
    return cam;
}

void CameraModel::validate() const {
    if (width <= 0 || height <= 0) {
        throw DomainError("camera: image dimensions must be positive");
    }
    if (!(focal > 0.0) || !std::isfinite(focal)) {
        throw DomainError("camera: focal length must be positive");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
        throw DomainError("camera: principal point must be finite");
    }
    if (!(r_min > 0.0)) {
        throw DomainError("camera: r_min must be positive");
    }
    if (!noise.allFinite() || (noise - noise.transpose()).cwiseAbs().maxCoeff() > 1e-15 * noise.cwiseAbs().maxCoeff()) {
        throw DomainError("camera: noise covariance must be finite and symmetric");
    }
    Eigen::LLT<Matrix3> llt(noise);
    if (llt.info() != Eigen::Success) {
        throw DomainError("camera: noise covariance must be positive definite");
    }
}

std::optional<double> CameraModel::isotropic_sigma() const {
    const double s2 = noise(0, 0);
    if (noise != Matrix3::Identity() * s2) {
        return std::nullopt;
    }
    return std::sqrt(s2);
}

DepthImage::DepthImage(CameraModel camera, std::vector<PixelObservation> grid)
    : camera_(std::move(camera)), grid_(std::move(grid)) {
    camera_.validate();
    const auto expected = static_cast<std::size_t>(camera_.width) * static_cast<std::size_t>(camera_.height);
    if (grid_.size() != expected) {
        throw DomainError("depth image: grid has " + std::to_string(grid_.size()) + " pixels, expected " +
                          std::to_string(expected));
    }
    for (int row = 0; row < camera_.height; ++row) {
        for (int col = 0; col < camera_.width; ++col) {
            const PixelObservation& px = grid_[index(col, row)];
            switch (px.state) {
                case PixelState::Unknown:
                    if (px.depth != 0.0) {
                        throw DomainError("depth image: UNKNOWN pixel carries a depth");
                    }
                    break;
                case PixelState::Object:
                case PixelState::Background:
                    if (!std::isfinite(px.depth) || px.depth < camera_.r_min) {
                        throw DomainError("depth image: measured depth outside [r_min, inf)");
                    }
                    break;
                default:
                    throw DomainError("depth image: invalid pixel state");
            }
            if (px.state == PixelState::Object) {
                object_points_.push_back(pixel_ray(col, row, px.depth));
            }
        }
    }
}

DepthImage DepthImage::empty(const CameraModel& camera) {
    const auto n = static_cast<std::size_t>(camera.width) * static_cast<std::size_t>(camera.height);
    return DepthImage(camera, std::vector<PixelObservation>(n));
}

std::vector<RayPoint> object_cloud(const DepthImage& img) { return img.object_points(); }

std::optional<PixelIndex> pixel_at(const DepthImage& img, double w, double h) {
    const CameraModel& cam = img.camera();
    const double col = std::floor(cam.w_to_col(w) + 0.5);
    const double row = std::floor(cam.h_to_row(h) + 0.5);
    if (!(col >= 0.0 && row >= 0.0 && col < cam.width && row < cam.height)) {
        return std::nullopt;
    }
    return PixelIndex{static_cast<int>(col), static_cast<int>(row)};
}

std::vector<RayPoint> subsample_object(const DepthImage& img, std::size_t n_max, std::uint64_t seed) {
    if (n_max < 1) {
        throw DomainError("subsample_object: n_max must be >= 1");
    }
    const auto& pts = img.object_points();
    if (pts.size() <= n_max) {
        return pts;
    }
    std::vector<RayPoint> out;
    out.reserve(n_max);
    Rng rng(seed);
    std::sample(pts.begin(), pts.end(), std::back_inserter(out), n_max, rng);
    return out;
}

}  // namespace maskreg
