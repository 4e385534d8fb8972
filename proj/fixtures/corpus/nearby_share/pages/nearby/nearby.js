Page({
  data: {
    latitude: 0,
    longitude: 0,
    shops: []
  },

  onShow: function () {
    var self = this
    wx.getLocation({
      type: 'gcj02',
      success: function (res) {
        self.setData({ latitude: res.latitude, longitude: res.longitude })
        self.loadShops(res.latitude, res.longitude)
      }
    })
  },

  loadShops: function (lat, lng) {
    var self = this
    wx.request({
      url: 'https://api.example.com/shops',
      data: { lat: lat, lng: lng },
      success: function (res) {
        self.setData({ shops: res.data.list })
      }
    })
  },

  openShop: function (e) {
    var shop = e.currentTarget.dataset.id
    wx.navigateTo({
      url: '/pages/shop/shop?id=' + shop + '&lat=' + this.data.latitude
    })
  }
})
