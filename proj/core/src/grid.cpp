#include "smart/grid.hpp"

#include "smart/errors.hpp"

#include <algorithm>
#include <sstream>

namespace smart {

RealImage::RealImage(Grid g, std::vector<double> values) : grid(g), data(std::move(values)) {
    if (static_cast<Eigen::Index>(data.size()) != grid.voxels()) {
        throw DataError("RealImage: value count does not match grid");
    }
}

Eigen::Index BinaryImage::count() const {
    return std::count_if(data.begin(), data.end(), [](std::uint8_t b) { return b != 0; });
}

ImageSeries::ImageSeries(Grid grid, std::vector<double> tsl_ms)
    : ImageSeries(grid, tsl_ms, CMatrix::Zero(grid.voxels(), static_cast<Eigen::Index>(tsl_ms.size()))) {}

ImageSeries::ImageSeries(Grid grid, std::vector<double> tsl_ms, CMatrix data)
    : grid_(grid), tsl_ms_(std::move(tsl_ms)), data_(std::move(data)) {
    if (grid_.nx <= 0 || grid_.ny <= 0 || grid_.nz <= 0) {
        throw DataError("ImageSeries: grid dimensions must be positive");
    }
    if (tsl_ms_.size() < 2) {
        throw DataError("ImageSeries: at least two spin-lock times are required");
    }
    if (!std::is_sorted(tsl_ms_.begin(), tsl_ms_.end(), std::less_equal<>())) {
        throw DataError("ImageSeries: spin-lock times must be strictly increasing");
    }
    if (data_.rows() != grid_.voxels() || data_.cols() != n_tsl()) {
        std::ostringstream os;
        os << "ImageSeries: data is " << data_.rows() << "x" << data_.cols() << ", expected "
           << grid_.voxels() << "x" << n_tsl();
        throw DataError(os.str());
    }
}

RealImage ImageSeries::magnitude(int tsl_index) const {
    RealImage out(grid_);
    for (Eigen::Index v = 0; v < voxels(); ++v) out[v] = std::abs(data_(v, tsl_index));
    return out;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) {
        std::ostringstream os;
        os << what << ": grid mismatch (" << a.nx << "x" << a.ny << "x" << a.nz << " vs " << b.nx << "x"
           << b.ny << "x" << b.nz << ")";
        throw DataError(os.str());
    }
}

} // namespace smart
