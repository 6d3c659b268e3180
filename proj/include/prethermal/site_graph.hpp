#pragma once

#include "prethermal/common.hpp"

#include <utility>
#include <vector>

namespace prethermal {

/// Finite lattice with graph distance and a uniform local dimension.
///
/// Site order is the tensor-product order: site 0 is the most significant
/// digit of a basis index, so an operator on site 0 of a two-site chain
/// embeds as `op ⊗ I`.
class SiteGraph {
public:
  static constexpr std::size_t kDefaultDimensionCap = 4096;

  SiteGraph(int num_sites, std::vector<std::pair<int, int>> edges, int local_dim,
            std::size_t dimension_cap = kDefaultDimensionCap);

  static SiteGraph chain(int num_sites, int local_dim = 2, bool periodic = false,
                         std::size_t dimension_cap = kDefaultDimensionCap);

  int num_sites() const { return num_sites_; }
  int local_dim() const { return local_dim_; }
  std::size_t dimension_cap() const { return dimension_cap_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int site) const { return adjacency_[site]; }

  /// d^|Λ|. Throws DimensionCapError above the cap.
  std::size_t hilbert_dim() const;
  std::size_t hilbert_dim_unchecked() const { return full_dim_; }

  /// Spatial dimension used by the charge-conservation bound (1 for chains).
  int spatial_dimension() const { return spatial_dimension_; }
  void set_spatial_dimension(int dim) { spatial_dimension_ = dim; }

  /// Graph distance, -1 between disconnected sites.
  int distance(int a, int b) const { return distance_[a][b]; }
  bool is_connected() const;
  bool is_connected(SiteMask mask) const;
  int diameter(SiteMask mask) const;

  SiteMask all_sites() const { return num_sites_ == 32 ? ~SiteMask{0} : ((SiteMask{1} << num_sites_) - 1); }

  /// Smallest connected superset found by joining components along shortest
  /// paths, lowest-indexed component first; ties go to the lower site index.
  /// Throws ValidationError if the sites lie in different graph components.
  SiteMask connected_superset(SiteMask mask) const;

  static std::vector<int> sites_of(SiteMask mask);
  static SiteMask mask_of(const std::vector<int>& sites);

private:
  std::vector<int> shortest_path(SiteMask from, SiteMask to) const;

  int num_sites_;
  int local_dim_;
  std::size_t dimension_cap_;
  std::size_t full_dim_;
  int spatial_dimension_ = 1;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> distance_;
};

} // namespace prethermal
