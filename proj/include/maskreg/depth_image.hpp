#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "maskreg/geometry.hpp"

namespace maskreg {

/// Pinhole depth camera. Pixel (col, row) has its center at
/// w = (col - cx) / focal, h = (row - cy) / focal.
struct CameraModel {
    int width = 160;
    int height = 120;
    double focal = 140.0;  // pixels
    double cx = 80.0;
    double cy = 60.0;
    /// Measurement covariance in ray coordinates (w, h dimensionless; r meters).
    Matrix3 noise = Matrix3::Identity() * (0.002 * 0.002);
    double r_min = 0.1;  // meters

    /// Camera with isotropic ray-coordinate noise sigma and the principal
    /// point at (width/2, height/2).
    static CameraModel isotropic(int width, int height, double focal, double sigma, double r_min = 0.1);

    /// Throws DomainError if dimensions, focal, r_min or the covariance are invalid.
    void validate() const;

    /// Isotropic sigma when the covariance is sigma^2 I; nullopt otherwise.
    std::optional<double> isotropic_sigma() const;

    double col_to_w(double col) const { return (col - cx) / focal; }
    double row_to_h(double row) const { return (row - cy) / focal; }
    double w_to_col(double w) const { return w * focal + cx; }
    double h_to_row(double h) const { return h * focal + cy; }

    bool operator==(const CameraModel&) const = default;
};

/// Per-pixel segmentation state. Values are the on-disk codes.
enum class PixelState : std::uint8_t {
    Unknown = 0,
    Object = 1,
    Background = 2,
};

struct PixelObservation {
    PixelState state = PixelState::Unknown;
    double depth = 0.0;  // meters; 0 when Unknown

    bool measured() const { return state != PixelState::Unknown; }
    bool operator==(const PixelObservation&) const = default;
};

struct PixelIndex {
    int col = 0;
    int row = 0;
    bool operator==(const PixelIndex&) const = default;
};

/// Segmented depth image: the OBJECT pixels are the surface patches, every
/// measured pixel bounds free space along its ray up to its depth.
class DepthImage {
public:
    DepthImage() = default;
    /// `grid` is row-major, width*height entries. Throws DomainError on
    /// inconsistent sizes or depths outside [r_min, inf) for measured pixels.
    DepthImage(CameraModel camera, std::vector<PixelObservation> grid);

    /// All-UNKNOWN image.
    static DepthImage empty(const CameraModel& camera);

    const CameraModel& camera() const { return camera_; }
    int width() const { return camera_.width; }
    int height() const { return camera_.height; }
    const std::vector<PixelObservation>& grid() const { return grid_; }

    bool in_bounds(int col, int row) const {
        return col >= 0 && row >= 0 && col < camera_.width && row < camera_.height;
    }
    const PixelObservation& at(int col, int row) const { return grid_[index(col, row)]; }
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(camera_.width) +
               static_cast<std::size_t>(col);
    }

    /// Ray coordinates of a pixel center at the given range.
    RayPoint pixel_ray(int col, int row, double r) const {
        return {camera_.col_to_w(col), camera_.row_to_h(row), r};
    }

    /// Cached OBJECT points in row-major order.
    const std::vector<RayPoint>& object_points() const { return object_points_; }
    std::size_t object_count() const { return object_points_.size(); }

    bool operator==(const DepthImage& other) const {
        return camera_ == other.camera_ && grid_ == other.grid_;
    }

private:
    CameraModel camera_;
    std::vector<PixelObservation> grid_;
    std::vector<RayPoint> object_points_;
};

/// OBJECT pixels as ray points, row-major.
std::vector<RayPoint> object_cloud(const DepthImage& img);

/// Nearest pixel whose center maps to (w, h); nullopt when out of view.
std::optional<PixelIndex> pixel_at(const DepthImage& img, double w, double h);

/// Uniform subset of at most n_max object points, without replacement and
/// reproducible for a given seed. Returns object_cloud(img) unchanged when
/// it has no more than n_max points. Throws DomainError if n_max < 1.
std::vector<RayPoint> subsample_object(const DepthImage& img, std::size_t n_max, std::uint64_t seed);

}  // namespace maskreg
