App({
  globalData: {
    userInfo: null,
    openid: ''
  },

  onLaunch: function () {
    var that = this
    wx.login({
      success: function (res) {
        wx.request({
          url: 'https://api.example.com/login',
          data: { code: res.code },
          success: function (resp) {
            that.globalData.openid = resp.data.openid
          }
        })
      }
    })
  }
})
