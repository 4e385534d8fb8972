var app = getApp()

Page({
  data: {
    nickName: '',
    avatarUrl: ''
  },

  onShow: function () {
    var info = app.globalData.userInfo
    if (info) {
      this.setData({
        nickName: info.nickName,
        avatarUrl: info.avatarUrl
      })
    }
  },

  shareCard: function () {
    var user = getApp().globalData.userInfo
    wx.uploadFile({
      url: 'https://api.example.com/card',
      filePath: user.avatarUrl,
      name: 'avatar',
      formData: { nick: user.nickName }
    })
  }
})
