#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace ldacp {

enum class Industry : std::uint8_t { kGames, kMedia, kECommerce, kLifeServices };
enum class CampaignType : std::uint8_t { kApp, kAppAdvance, kSitePage, kLiveStream };

inline constexpr int kNumIndustries = 4;
inline constexpr int kNumCampaignTypes = 4;

inline constexpr std::array<Industry, kNumIndustries> kAllIndustries = {
    Industry::kGames, Industry::kMedia, Industry::kECommerce, Industry::kLifeServices};
inline constexpr std::array<CampaignType, kNumCampaignTypes> kAllCampaignTypes = {
    CampaignType::kApp, CampaignType::kAppAdvance, CampaignType::kSitePage, CampaignType::kLiveStream};

std::string_view name(Industry i);
std::string_view name(CampaignType t);

// Throw std::invalid_argument on unknown names.
Industry industry_from_string(std::string_view s);
CampaignType campaign_type_from_string(std::string_view s);

inline int index_of(Industry i) { return static_cast<int>(i); }
inline int index_of(CampaignType t) { return static_cast<int>(t); }

}  // namespace ldacp
